use fvfldo::dc::dc_operating_point;
use fvfldo::netlist::{Behavioral, Circuit, Element, NodeId, GROUND};
use fvfldo::Error;

/// Source follower with square-law device and resistive load:
/// `vout = R k (vg - vth - vout)^2`.
fn follower(vg: f64, k: f64, vth: f64, r: f64) -> Circuit {
    let mut c = Circuit::with_nodes(4);
    c.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: vg, ac: 0.0 }).unwrap();
    c.add_element(Element::VSource { pos: NodeId(2), neg: GROUND, dc: 1.5, ac: 0.0 }).unwrap();
    c.add_element(Element::NonlinearVccs {
        cp: NodeId(1),
        cn: NodeId(3),
        op: NodeId(2),
        on: NodeId(3),
        model: Behavioral::square(k, vth),
    })
    .unwrap();
    c.add_element(Element::Resistor { a: NodeId(3), b: GROUND, ohms: r }).unwrap();
    c
}

#[test]
fn square_law_follower_matches_quadratic_root() {
    for (vg, k, vth, r) in [(1.0, 2e-3, 0.4, 1e3), (1.2, 0.166, 0.4, 80.0), (0.9, 5e-4, 0.3, 10e3)] {
        let op = dc_operating_point(&follower(vg, k, vth, r), 1e-13, 100).unwrap();
        // With x = vg - vth - vout: R k x^2 + x - (vg - vth) = 0, positive root.
        let a = r * k;
        let x = (-1.0 + (1.0 + 4.0 * a * (vg - vth)).sqrt()) / (2.0 * a);
        let expected = vg - vth - x;
        let got = op.voltage(NodeId(3));
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }
}

#[test]
fn cut_off_device_leaves_output_at_ground() {
    let op = dc_operating_point(&follower(0.2, 1e-3, 0.4, 1e3), 1e-12, 50).unwrap();
    assert_eq!(op.voltage(NodeId(3)), 0.0);
}

#[test]
fn parallel_sources_are_singular_and_named() {
    let mut c = Circuit::new();
    let n = c.add_node("V_X");
    c.add_element(Element::VSource { pos: n, neg: GROUND, dc: 1.0, ac: 0.0 }).unwrap();
    c.add_element(Element::VSource { pos: n, neg: GROUND, dc: 2.0, ac: 0.0 }).unwrap();
    match dc_operating_point(&c, 1e-9, 20) {
        Err(Error::Singular { pivot, .. }) => assert!(!pivot.is_empty()),
        other => panic!("expected singular, got {other:?}"),
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let c = follower(1.2, 0.166, 0.4, 80.0);
    match dc_operating_point(&c, 1e-15, 1) {
        Err(Error::NoConvergence { iterations, residual }) => {
            assert!(iterations >= 1);
            assert!(residual.is_finite());
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn bad_options_are_argument_errors() {
    let c = follower(1.0, 1e-3, 0.4, 1e3);
    assert!(matches!(dc_operating_point(&c, 0.0, 10), Err(Error::InvalidArgument(_))));
    assert!(matches!(dc_operating_point(&c, 1e-9, 0), Err(Error::InvalidArgument(_))));
}
