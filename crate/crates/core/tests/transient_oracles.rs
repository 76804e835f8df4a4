use fvfldo::netlist::{Circuit, Element, ElementId, NodeId, GROUND};
use fvfldo::transient::{simulate, simulate_with, Pwl, Stimulus, TransientOptions};
use fvfldo::Error;

const TAU: f64 = 1e-3; // 1 kOhm * 1 uF

fn rc(v: f64) -> Circuit {
    let mut c = Circuit::with_nodes(3);
    c.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: v, ac: 0.0 }).unwrap();
    c.add_element(Element::Resistor { a: NodeId(1), b: NodeId(2), ohms: 1e3 }).unwrap();
    c.add_element(Element::Capacitor { a: NodeId(2), b: GROUND, farads: 1e-6 }).unwrap();
    c
}

/// Worst deviation from `1.2 (1 - exp(-t/tau))` for a step applied at t = 0
/// to an uncharged capacitor.
fn rc_step_error(tol_rel: f64) -> f64 {
    let mut o = TransientOptions::new(5.0 * TAU, tol_rel, 1e-6, TAU / 20.0);
    o.uic = true;
    let tr = simulate_with(&rc(1.2), &[], &o).unwrap();
    tr.times
        .iter()
        .zip(tr.node(NodeId(2)))
        .map(|(t, v)| (v - 1.2 * (1.0 - (-t / TAU).exp())).abs())
        .fold(0.0, f64::max)
}

#[test]
fn rc_step_tracks_analytic_within_a_tenth_percent() {
    let err = rc_step_error(1e-4);
    assert!(err < 1e-3 * 1.2, "max error {err}");
}

#[test]
fn tighter_tolerance_never_hurts_accuracy() {
    let mut prev = rc_step_error(1e-3);
    for tol in [5e-4, 2.5e-4, 1.25e-4] {
        let e = rc_step_error(tol);
        assert!(e <= prev, "tol {tol}: {e} > {prev}");
        prev = e;
    }
}

#[test]
fn constant_current_ramps_a_capacitor_exactly() {
    // 1 uA into 1 uF is 1 V/s.
    let mut c = Circuit::with_nodes(2);
    c.add_element(Element::ISource { pos: GROUND, neg: NodeId(1), dc: 1e-6, ac: 0.0 }).unwrap();
    c.add_element(Element::Capacitor { a: NodeId(1), b: GROUND, farads: 1e-6 }).unwrap();
    let mut o = TransientOptions::new(1e-3, 1e-6, 1e-9, 1e-5);
    o.uic = true;
    let tr = simulate_with(&c, &[], &o).unwrap();
    for (t, v) in tr.times.iter().zip(tr.node(NodeId(1))) {
        assert!((v - t).abs() < 1e-12, "t={t}: {v}");
    }
}

#[test]
fn charge_is_conserved_on_a_capacitive_node() {
    // A PWL current into two series-stacked capacitors to ground.
    let mut c = Circuit::with_nodes(3);
    let src = c.add_element(Element::ISource { pos: GROUND, neg: NodeId(1), dc: 0.0, ac: 0.0 }).unwrap();
    c.add_element(Element::Capacitor { a: NodeId(1), b: NodeId(2), farads: 2e-9 }).unwrap();
    c.add_element(Element::Capacitor { a: NodeId(2), b: GROUND, farads: 2e-9 }).unwrap();
    c.add_element(Element::Resistor { a: NodeId(2), b: GROUND, ohms: 1e12 }).unwrap();
    let wave = Pwl::new(vec![(0.0, 0.0), (1e-6, 1e-6), (2e-6, -0.5e-6), (3e-6, 0.0)]).unwrap();
    let tol_abs = 1e-6;
    // Node 1 has no DC path, so start from initial conditions.
    let mut o = TransientOptions::new(4e-6, 1e-4, tol_abs, 5e-8);
    o.uic = true;
    let tr = simulate_with(&c, &[Stimulus::pwl(src, wave)], &o).unwrap();
    let i = tr.current(src).unwrap();
    let q: f64 = tr.times.windows(2).zip(i.windows(2)).map(|(t, i)| 0.5 * (i[0] + i[1]) * (t[1] - t[0])).sum();
    // Series stack: 1 nF seen from node 1 (leak through 1 TOhm is negligible).
    let dv = tr.node(NodeId(1)).last().unwrap() - tr.node(NodeId(1))[0];
    assert!((q - 1e-9 * dv).abs() <= 10.0 * tol_abs * 1e-9, "q={q} C*dv={}", 1e-9 * dv);
}

#[test]
fn dc_steady_circuit_stays_flat() {
    let mut c = rc(1.2);
    c.add_element(Element::Resistor { a: NodeId(2), b: GROUND, ohms: 3e3 }).unwrap();
    let tol_abs = 1e-6;
    let tr = simulate(&c, &[], 10.0 * TAU, 1e-4, tol_abs, TAU).unwrap();
    for n in 1..c.node_count() {
        let s = tr.node(NodeId(n));
        assert!(s.iter().all(|v| (v - s[0]).abs() < tol_abs));
    }
}

#[test]
fn breakpoints_are_sampled_exactly() {
    let c = rc(0.0);
    let wave = Pwl::new(vec![(0.0, 0.0), (1.0e-6, 0.0), (1.08e-6, 1.2)]).unwrap();
    let tr = simulate(&c, &[Stimulus::pwl(ElementId(0), wave)], 3e-6, 1e-4, 1e-6, 1e-7).unwrap();
    assert!(tr.times.iter().any(|t| *t == 1.0e-6));
    assert!(tr.times.iter().any(|t| *t == 1.08e-6));
    assert_eq!(*tr.times.last().unwrap(), 3e-6);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn digital_crossings_become_events() {
    let c = rc(0.0);
    let wave = Pwl::new(vec![(0.0, 0.0), (1e-6, 0.0), (1.1e-6, 1.5), (2e-6, 1.5), (2.1e-6, 0.0)]).unwrap();
    let tr = simulate(&c, &[Stimulus::digital(ElementId(0), wave, "V_EN")], 3e-6, 1e-4, 1e-6, 1e-7).unwrap();
    let labels: Vec<&str> = tr.events.iter().map(|e| e.1.as_str()).collect();
    assert_eq!(labels, ["V_EN rise", "V_EN fall"]);
    for (t, _) in &tr.events {
        assert!(tr.times.contains(t));
    }
    assert!((tr.events[0].0 - 1.05e-6).abs() < 1e-18);
}

#[test]
fn csv_has_header_rows_and_event_comments() {
    let mut c = rc(0.0);
    c.set_label("V_OUT", NodeId(2)).unwrap();
    let wave = Pwl::new(vec![(0.0, 0.0), (1e-6, 1.5)]).unwrap();
    let tr = simulate(&c, &[Stimulus::digital(ElementId(0), wave, "V_EN")], 2e-6, 1e-4, 1e-6, 1e-7).unwrap();
    let csv = tr.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time_s,V_OUT"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), tr.times.len() + 1);
    assert!(csv.trim_end().ends_with("V_EN rise"));
    assert!(csv.contains("# event,5.00000000e-7,V_EN rise"));
}

#[test]
fn argument_errors() {
    let c = rc(1.0);
    assert!(matches!(simulate(&c, &[], 0.0, 1e-4, 1e-6, 1e-7), Err(Error::InvalidArgument(_))));
    assert!(matches!(simulate(&c, &[], 1e-6, 0.0, 1e-6, 1e-7), Err(Error::InvalidArgument(_))));
    let not_a_source = Stimulus::pwl(ElementId(1), Pwl::constant(1.0));
    assert!(matches!(simulate(&c, &[not_a_source], 1e-6, 1e-4, 1e-6, 1e-7), Err(Error::InvalidArgument(_))));
}

#[test]
fn pwl_rejects_unordered_points_and_holds_ends() {
    assert!(Pwl::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
    assert!(Pwl::new(vec![(1.0, 0.0), (0.5, 1.0)]).is_err());
    let p = Pwl::new(vec![(1.0, 2.0), (2.0, 4.0)]).unwrap();
    assert_eq!((p.value(0.0), p.value(1.5), p.value(9.0)), (2.0, 3.0, 4.0));
}
