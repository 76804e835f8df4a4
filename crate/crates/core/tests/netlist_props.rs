use fvfldo::ac::{ac_sweep, FrequencySweep};
use fvfldo::dc::dc_operating_point;
use fvfldo::netlist::{parse_netlist, write_netlist, Behavioral, Circuit, Element, ElementId, NodeId, Violation, GROUND};
use fvfldo::Error;
use proptest::prelude::*;

#[test]
fn add_element_basics() {
    let mut c = Circuit::new();
    let id = c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 1e3 }).unwrap();
    assert_eq!(id, ElementId(0));
    assert!(c.node_count() >= 2);
    assert_eq!(c.add_element(Element::Capacitor { a: NodeId(1), b: GROUND, farads: 1e-9 }).unwrap(), ElementId(1));

    let mut c3 = Circuit::with_nodes(3);
    let err = c3.add_element(Element::Capacitor { a: NodeId(5), b: GROUND, farads: 160e-12 }).unwrap_err();
    assert!(matches!(err, Error::UnknownNode { node: 5, .. }));
    assert!(c3.elements().is_empty());
}

#[test]
fn validation_reports() {
    let mut rc = Circuit::with_nodes(2);
    rc.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 1e3 }).unwrap();
    rc.add_element(Element::Capacitor { a: NodeId(1), b: GROUND, farads: 1e-9 }).unwrap();
    rc.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: 1.0, ac: 0.0 }).unwrap();
    assert!(rc.validate().is_ok());

    let mut iso = Circuit::with_nodes(4);
    for e in rc.elements() {
        iso.add_element(e.clone()).unwrap();
    }
    iso.add_element(Element::Resistor { a: NodeId(2), b: NodeId(3), ohms: 1e3 }).unwrap();
    let v = iso.validate().violations;
    assert!(v.iter().any(|x| matches!(x, Violation::FloatingNode { node: NodeId(3), .. })), "{v:?}");
    assert!(v.iter().any(|x| x.to_string().contains("node 3")));

    let mut zero = rc.clone();
    zero.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 0.0 }).unwrap();
    assert!(zero
        .validate()
        .violations
        .iter()
        .any(|x| matches!(x, Violation::NonPositiveValue { element: ElementId(3), .. })));

    assert_eq!(iso.validate(), iso.validate());
}

#[test]
fn duplicate_labels_are_reported() {
    let mut c = Circuit::new();
    let a = c.add_node("x");
    c.add_element(Element::Resistor { a, b: GROUND, ohms: 1.0 }).unwrap();
    let text = write_netlist(&c) + ".label x 1\n";
    let parsed = parse_netlist(&text);
    let dup = match parsed {
        Ok(c) => c.validate().violations.iter().any(|v| matches!(v, Violation::DuplicateLabel { .. })),
        Err(_) => true,
    };
    assert!(dup);
}

fn value() -> impl Strategy<Value = f64> {
    (1.0f64..10.0, -15i32..7).prop_map(|(m, e)| m * 10f64.powi(e))
}

fn element(nodes: usize) -> impl Strategy<Value = Element> {
    let n = move || (0..nodes).prop_map(NodeId);
    prop_oneof![
        (n(), n(), value()).prop_map(|(a, b, ohms)| Element::Resistor { a, b, ohms }),
        (n(), n(), value()).prop_map(|(a, b, farads)| Element::Capacitor { a, b, farads }),
        (n(), n(), n(), n(), -1.0f64..1.0).prop_map(|(cp, cn, op, on, siemens)| Element::Vccs { cp, cn, op, on, siemens }),
        (n(), n(), -5.0f64..5.0, 0.0f64..2.0).prop_map(|(pos, neg, dc, ac)| Element::VSource { pos, neg, dc, ac }),
        (n(), n(), -1e-3f64..1e-3, 0.0f64..1.0).prop_map(|(pos, neg, dc, ac)| Element::ISource { pos, neg, dc, ac }),
        (n(), n(), n(), n(), value(), value())
            .prop_map(|(cp, cn, op, on, g, imax)| Element::NonlinearVccs { cp, cn, op, on, model: Behavioral::tanh(g, imax) }),
        (n(), n(), n(), n(), value(), 0.0f64..1.0, n(), value()).prop_map(|(cp, cn, op, on, k, vth, sel, k2)| {
            let hi = fvfldo::netlist::ModelParams { k: k2, vth, ..Default::default() };
            Element::NonlinearVccs { cp, cn, op, on, model: Behavioral::square(k, vth).switched(sel, 0.75, hi) }
        }),
        (n(), n(), "[a-z][a-z0-9_]{0,6}").prop_map(|(from, to, label)| Element::BreakPort { from, to, label }),
    ]
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (2usize..7).prop_flat_map(|nodes| {
        prop::collection::vec(element(nodes), 1..12).prop_map(move |els| {
            let mut c = Circuit::with_nodes(nodes);
            for e in els {
                c.add_element(e).unwrap();
            }
            c.set_label("out", NodeId(nodes - 1)).unwrap();
            c
        })
    })
}

/// A resistive ladder with a source, a transconductor and capacitors, in an
/// arbitrary element order.
fn ladder(values: &[f64], order: &[usize]) -> (Circuit, ElementId) {
    let n = values.len();
    let mut els = vec![Element::VSource { pos: NodeId(1), neg: GROUND, dc: 1.0, ac: 1.0 }];
    for (i, r) in values.iter().enumerate() {
        els.push(Element::Resistor { a: NodeId(i + 1), b: NodeId(i + 2), ohms: *r });
        els.push(Element::Capacitor { a: NodeId(i + 2), b: GROUND, farads: r * 1e-12 });
    }
    els.push(Element::Resistor { a: NodeId(n + 1), b: GROUND, ohms: 1e3 });
    els.push(Element::Vccs { cp: NodeId(n + 1), cn: GROUND, op: NodeId(2), on: GROUND, siemens: 1e-4 });
    let mut c = Circuit::with_nodes(n + 2);
    let mut src = ElementId(0);
    for &k in order.iter().filter(|k| **k < els.len()) {
        let id = c.add_element(els[k].clone()).unwrap();
        if k == 0 {
            src = id;
        }
    }
    (c, src)
}

proptest! {
    #[test]
    fn netlists_round_trip(c in circuit()) {
        let text = write_netlist(&c);
        let back = parse_netlist(&text).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn validate_is_idempotent(c in circuit()) {
        prop_assert_eq!(c.validate(), c.validate());
    }

    #[test]
    fn element_order_does_not_change_results(
        values in prop::collection::vec(100.0f64..1e5, 1..5),
        order in Just((0..13).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let canonical: Vec<usize> = (0..13).collect();
        let (a, sa) = ladder(&values, &canonical);
        let (b, sb) = ladder(&values, &order);
        prop_assert_eq!(a.elements().len(), b.elements().len());
        let out = NodeId(values.len() + 1);

        let (oa, ob) = (dc_operating_point(&a, 1e-13, 50).unwrap(), dc_operating_point(&b, 1e-13, 50).unwrap());
        for (x, y) in oa.node_voltages.iter().zip(&ob.node_voltages) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12));
        }
        let sweep = FrequencySweep::new(1e3, 1e9, 2).unwrap();
        let ra = ac_sweep(&a, &sweep, sa, out).unwrap();
        let rb = ac_sweep(&b, &sweep, sb, out).unwrap();
        for (x, y) in ra.values.iter().zip(&rb.values) {
            prop_assert!((x - y).norm() <= 1e-10 * x.norm());
        }
    }
}
