use fvfldo::ac::{loop_gain, FrequencySweep};
use fvfldo::dc::{dc_operating_point_with, DcOptions};
use fvfldo::ldo::*;
use fvfldo::transient::{simulate_with, Pwl, TransientOptions};
use fvfldo::netlist::Element;
use fvfldo::Error;
use proptest::prelude::*;

fn sweep() -> FrequencySweep {
    FrequencySweep::new(1.0, 10e9, 40).unwrap()
}

fn held(params: &LdoParams, mode: Mode, load: f64) -> LdoStimuli {
    let ven = if mode == Mode::High { params.v_in } else { 0.0 };
    LdoStimuli { load: Some(Pwl::constant(load)), ven: Some(Pwl::constant(ven)) }
}

#[test]
fn regulates_at_no_load_in_low_mode() {
    let p = LdoParams::default();
    let (ldo, stims, nodeset) = build_transient(&p, &held(&p, Mode::Low, 0.0)).unwrap();
    let op = dc_operating_point_with(&ldo.circuit, &DcOptions { nodeset: nodeset.clone(), ..DcOptions::default() }).unwrap();
    assert!((op.voltage(ldo.nodes.out) - 1.2).abs() < 1e-3);

    let mut o = TransientOptions::new(1e-6, 1e-4, 1e-6, 1e-8);
    o.nodeset = nodeset;
    let tr = simulate_with(&ldo.circuit, &stims, &o).unwrap();
    assert!(tr.voltage("V_OUT").unwrap().iter().all(|v| (v - 1.2).abs() < 1e-3));
}

#[test]
fn linearised_transient_model_matches_small_signal_model() {
    let p = LdoParams::default();
    for (mode, load) in [(Mode::Low, 0.0), (Mode::High, 15e-3)] {
        let small = build_small_signal(&p, mode, load).unwrap();
        let ss_op = dc_operating_point_with(&small.circuit, &DcOptions::default()).unwrap();
        let ss = linearized_blocks(&small, &ss_op);

        let (mut tran, stims, nodeset) = build_transient(&p, &held(&p, mode, load)).unwrap();
        // A plain DC solve sees source values, not stimuli: apply them at t = 0.
        for s in &stims {
            match tran.circuit.element_mut(s.source).unwrap() {
                Element::VSource { dc, .. } | Element::ISource { dc, .. } => *dc = s.value(0.0),
                _ => unreachable!(),
            }
        }
        let op = dc_operating_point_with(&tran.circuit, &DcOptions { nodeset, ..DcOptions::default() }).unwrap();
        let lin = linearized_blocks(&tran, &op);

        assert_eq!(ss.len(), lin.len());
        for ((name, a), (name2, b)) in ss.iter().zip(&lin) {
            assert_eq!(name, name2);
            assert!((a - b).abs() <= 0.01 * a.abs(), "{mode} {load}: {name} small-signal {a} vs linearised {b}");
        }
    }
}

#[test]
fn every_loop_has_margin_at_light_and_heavy_load() {
    let p = LdoParams::default();
    for (mode, load) in [(Mode::Low, 0.0), (Mode::High, 15e-3)] {
        let ldo = build_small_signal(&p, mode, load).unwrap();
        for port in ["loop1", "loop2", "overall"] {
            let r = loop_gain(&ldo.circuit, port, &sweep()).unwrap();
            let pm = r.phase_margin_deg.unwrap_or_else(|| panic!("{mode} {load} {port}: no crossing"));
            assert!(pm > 45.0, "{mode} {load} {port}: {pm}");
        }
    }
}

#[test]
fn ctrl_pole_dominates_loop2() {
    let p = LdoParams::default();
    let poles = pole_estimates(&p, Mode::Low, 0.0);
    let ctrl = poles.iter().find(|(n, _)| *n == "V_CTRL").unwrap().1;
    for (n, f) in &poles {
        if *n != "V_CTRL" {
            assert!(ctrl < f / 10.0, "V_CTRL {ctrl} vs {n} {f}");
        }
    }
}

#[test]
fn gate_buffer_improves_margin_in_both_modes() {
    let p = LdoParams::default();
    for (mode, load) in [(Mode::Low, 0.0), (Mode::High, 15e-3)] {
        let pm = |buffer| {
            let ldo = build_small_signal_with(&p, mode, load, SmallSignalOptions { buffer }).unwrap();
            loop_gain(&ldo.circuit, "overall", &sweep()).unwrap().phase_margin_deg.unwrap()
        };
        assert!(pm(true) > pm(false), "{mode}");
    }
}

#[test]
fn reference_current_is_mode_invariant() {
    let p = LdoParams::default();
    assert_eq!(bias_for_mode(&p, Mode::Low).i_ref, bias_for_mode(&p, Mode::High).i_ref);
    assert_eq!(bias_for_mode(&p, Mode::High).i_ref, p.i_ref);
}

#[test]
fn mode_threshold() {
    assert_eq!(mode_from_ven(0.0, 1.5), Mode::Low);
    assert_eq!(mode_from_ven(1.5, 1.5), Mode::High);
    assert_eq!(mode_from_ven(0.76, 1.5), Mode::High);
    assert_eq!(mode_from_ven(0.75, 1.5), Mode::Low);
}

#[test]
fn schedule_points() {
    let p = LdoParams::default();
    assert_eq!(quiescent_current(&p, Mode::Low, 100e-6).unwrap(), 3e-6);
    assert_eq!(quiescent_current(&p, Mode::High, 5e-3).unwrap(), 50e-6);
    assert_eq!(quiescent_current(&p, Mode::High, 15e-3).unwrap(), 110e-6);
    let mid = quiescent_current(&p, Mode::High, 10e-3).unwrap();
    assert!((mid - 80e-6).abs() <= 1e-18);
    assert!(matches!(quiescent_current(&p, Mode::Low, 600e-6), Err(Error::LoadOutOfRange { mode: "low", .. })));
}

#[test]
fn parameter_file_round_trips_and_rejects_bad_values() {
    let p = LdoParams::default();
    assert_eq!(LdoParams::parse(&p.to_text()).unwrap(), p);
    let q = LdoParams::parse("cLoadF = 200p\n").unwrap();
    assert_eq!(q.c_load, 200e-12);
    assert!(LdoParams::parse("noSuchKey = 1\n").is_err());
    assert!(LdoParams::parse("cLoadF = -1p\n").is_err());
    assert!(LdoParams::parse("iqLowA = 60u\n").is_err());
    assert!(LdoParams::parse("bufferCurrentRatio = 0.5\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn high_mode_iq_is_monotone(a in 0.0f64..30e-3, b in 0.0f64..30e-3) {
        let p = LdoParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let qa = quiescent_current(&p, Mode::High, lo).unwrap();
        let qb = quiescent_current(&p, Mode::High, hi).unwrap();
        prop_assert!(qa <= qb);
        prop_assert!(qa >= p.iq_high_min && qb <= p.iq_high_max);
    }

    #[test]
    fn low_mode_iq_is_flat(load in 0.0f64..=500e-6) {
        let p = LdoParams::default();
        prop_assert_eq!(quiescent_current(&p, Mode::Low, load).unwrap(), p.iq_low);
    }
}
