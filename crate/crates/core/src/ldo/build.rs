use std::f64::consts::PI;

use super::params::{LdoParams, Mode};
use super::{bias_for_mode, mode_from_ven};
use crate::dc::OperatingPoint;
use crate::error::{Error, Result};
use crate::netlist::{Behavioral, Circuit, Element, ElementId, ModelParams, NodeId, GROUND};
use crate::transient::{Pwl, Stimulus};

/// Named behavioural blocks shared by both circuit flavours, in the order
/// they are stamped.
pub const BLOCKS: [&str; 10] =
    ["ea1", "roEa1", "ea2", "roEa2", "sense", "ctrl", "roSense", "buffer", "pass", "roPass"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdoNodes {
    pub vin: NodeId,
    pub vref: NodeId,
    pub vcb: NodeId,
    pub ven: NodeId,
    pub ea: NodeId,
    pub ea_in: NodeId,
    pub ctrl: NodeId,
    pub out_sense: NodeId,
    pub d: NodeId,
    pub g: NodeId,
    pub g_pass: NodeId,
    pub out: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdoCircuit {
    pub circuit: Circuit,
    pub nodes: LdoNodes,
    pub supply: ElementId,
    pub ven_source: ElementId,
    /// Load current source (transient flavour only).
    pub load_source: Option<ElementId>,
    pub blocks: Vec<(&'static str, ElementId)>,
}

impl LdoCircuit {
    pub fn block(&self, name: &str) -> Option<ElementId> {
        self.blocks.iter().find(|(n, _)| *n == name).map(|(_, e)| *e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSignalOptions {
    /// When false, V_D drives V_G directly (gate buffer removed).
    pub buffer: bool,
}

impl Default for SmallSignalOptions {
    fn default() -> Self {
        Self { buffer: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LdoStimuli {
    pub load: Option<Pwl>,
    pub ven: Option<Pwl>,
}

struct Builder {
    c: Circuit,
    blocks: Vec<(&'static str, ElementId)>,
}

impl Builder {
    fn add(&mut self, e: Element) -> ElementId {
        self.c.add_element(e).expect("builder only uses allocated nodes")
    }

    fn block(&mut self, name: &'static str, e: Element) -> ElementId {
        let id = self.add(e);
        self.blocks.push((name, id));
        id
    }
}

fn skeleton(params: &LdoParams, ac_supply: f64) -> (Builder, LdoNodes, ElementId, ElementId) {
    let mut c = Circuit::new();
    let labels = [
        "V_IN", "V_REF", "V_B", "V_EN", "V_EA", "V_EA_IN", "V_CTRL", "V_OUT_SENSE", "V_D", "V_G", "V_G_PASS", "V_OUT",
    ];
    let ids: Vec<NodeId> = labels.iter().map(|l| c.add_node(l)).collect();
    let nodes = LdoNodes {
        vin: ids[0],
        vref: ids[1],
        vcb: ids[2],
        ven: ids[3],
        ea: ids[4],
        ea_in: ids[5],
        ctrl: ids[6],
        out_sense: ids[7],
        d: ids[8],
        g: ids[9],
        g_pass: ids[10],
        out: ids[11],
    };
    let mut b = Builder { c, blocks: Vec::new() };
    let supply = b.add(Element::VSource { pos: nodes.vin, neg: GROUND, dc: params.v_in, ac: ac_supply });
    b.add(Element::VSource { pos: nodes.vref, neg: GROUND, dc: params.v_ref, ac: 0.0 });
    b.add(Element::VSource { pos: nodes.vcb, neg: GROUND, dc: params.v_ctrl_bias, ac: 0.0 });
    let ven = b.add(Element::VSource { pos: nodes.ven, neg: GROUND, dc: 0.0, ac: 0.0 });
    (b, nodes, supply, ven)
}

fn check_load(params: &LdoParams, mode: Mode, load: f64) -> Result<()> {
    let (min, max) = match mode {
        Mode::Low => (0.0, params.load_low_max),
        Mode::High => (params.load_high_min, params.load_high_max),
    };
    if load.is_finite() && load >= min && load <= max {
        Ok(())
    } else {
        Err(Error::LoadOutOfRange { mode: mode.name(), load, min, max })
    }
}

pub fn build_small_signal(params: &LdoParams, mode: Mode, load: f64) -> Result<LdoCircuit> {
    build_small_signal_with(params, mode, load, SmallSignalOptions::default())
}

/// Linear circuit of the regulator at one operating point. The supply
/// source carries AC magnitude 1 so the same circuit serves PSR sweeps.
pub fn build_small_signal_with(params: &LdoParams, mode: Mode, load: f64, opts: SmallSignalOptions) -> Result<LdoCircuit> {
    params.check()?;
    check_load(params, mode, load)?;
    let m = params.mode(mode);
    let (mut b, n, supply, ven) = skeleton(params, 1.0);

    b.block("ea1", Element::Vccs { cp: n.out, cn: n.vref, op: GROUND, on: n.ea, siemens: m.gm_ea1 });
    b.block("roEa1", Element::Resistor { a: n.ea, b: GROUND, ohms: m.ro_ea1 });
    b.add(Element::Capacitor { a: n.ea, b: GROUND, farads: params.c_ea });
    b.add(Element::BreakPort { from: n.ea, to: n.ea_in, label: "loop2".into() });

    b.block("ea2", Element::Vccs { cp: n.ea_in, cn: GROUND, op: n.ctrl, on: GROUND, siemens: m.gm_ea2 });
    b.block("roEa2", Element::Resistor { a: n.ctrl, b: n.vcb, ohms: m.ro_ea2 });
    b.add(Element::Capacitor { a: n.ctrl, b: GROUND, farads: params.c_comp });

    b.add(Element::BreakPort { from: n.out, to: n.out_sense, label: "loop1".into() });
    b.block("sense", Element::Vccs { cp: n.out_sense, cn: n.vref, op: GROUND, on: n.d, siemens: m.gm_sense });
    b.block("ctrl", Element::Vccs { cp: n.ctrl, cn: n.vcb, op: n.d, on: GROUND, siemens: m.gm_ctrl });
    b.block("roSense", Element::Resistor { a: n.d, b: n.vin, ohms: m.ro_sense });
    b.add(Element::Capacitor { a: n.d, b: GROUND, farads: params.c_drain });

    if opts.buffer {
        b.block("buffer", Element::Vccs { cp: n.d, cn: n.g, op: GROUND, on: n.g, siemens: 1.0 / m.ro_buffer });
    } else {
        b.add(Element::VSource { pos: n.g, neg: n.d, dc: 0.0, ac: 0.0 });
    }
    b.add(Element::BreakPort { from: n.g, to: n.g_pass, label: "overall".into() });
    b.add(Element::Capacitor { a: n.g_pass, b: n.vin, farads: params.c_gate });

    b.block("pass", Element::Vccs { cp: n.vin, cn: n.g_pass, op: n.vin, on: n.out, siemens: m.gm_pass });
    b.block("roPass", Element::Resistor { a: n.vin, b: n.out, ohms: m.ro_pass });
    b.add(Element::Capacitor { a: n.out, b: GROUND, farads: params.c_load });
    if load > 0.0 {
        b.add(Element::Resistor { a: n.out, b: GROUND, ohms: params.v_out_target / load });
    }

    Ok(LdoCircuit { circuit: b.c, nodes: n, supply, ven_source: ven, load_source: None, blocks: b.blocks })
}

fn lin(g: f64, i0: f64) -> ModelParams {
    ModelParams { g, i0, ..Default::default() }
}

/// Initial guesses that put Newton near the regulated operating point.
fn nodeset(params: &LdoParams, n: &LdoNodes, mode: Mode, load: f64) -> Vec<(NodeId, f64)> {
    let gate = params.v_in - params.pass_vth - params.pass_overdrive(mode, load);
    vec![
        (n.vin, params.v_in),
        (n.vref, params.v_ref),
        (n.vcb, params.v_ctrl_bias),
        (n.ea, 0.0),
        (n.ea_in, 0.0),
        (n.ctrl, params.v_ctrl_bias),
        (n.d, gate),
        (n.g, gate),
        (n.g_pass, gate),
        (n.out, params.v_out_target),
        (n.out_sense, params.v_out_target),
    ]
}

/// Nonlinear behavioural circuit plus its stimuli. Both the load current
/// and the V_EN waveform are required.
pub fn build_transient(params: &LdoParams, stimuli: &LdoStimuli) -> Result<(LdoCircuit, Vec<Stimulus>, Vec<(NodeId, f64)>)> {
    params.check()?;
    let ven_wave = stimuli.ven.clone().ok_or_else(|| Error::Config("missing V_EN stimulus".into()))?;
    let load_wave = stimuli.load.clone().ok_or_else(|| Error::Config("missing load-current stimulus".into()))?;

    let (mut b, n, supply, ven) = skeleton(params, 0.0);
    let thr = 0.5 * params.v_in;
    let (lo, hi) = (params.mode(Mode::Low), params.mode(Mode::High));
    let (blo, bhi) = (bias_for_mode(params, Mode::Low), bias_for_mode(params, Mode::High));
    let sw = |m: Behavioral, hi: ModelParams| m.switched(n.ven, thr, hi);
    let tanh_hi = |g: f64, imax: f64| ModelParams { g, imax, ..Default::default() };
    let x = |cp, cn, op, on, model| Element::NonlinearVccs { cp, cn, op, on, model };

    b.block("ea1", x(n.out, n.vref, GROUND, n.ea, sw(Behavioral::tanh(lo.gm_ea1, lo.i_ea1_max), tanh_hi(hi.gm_ea1, hi.i_ea1_max))));
    b.block("roEa1", x(n.ea, GROUND, n.ea, GROUND, sw(Behavioral::lin(1.0 / lo.ro_ea1, 0.0), lin(1.0 / hi.ro_ea1, 0.0))));
    b.add(Element::Capacitor { a: n.ea, b: GROUND, farads: params.c_ea });
    b.add(Element::BreakPort { from: n.ea, to: n.ea_in, label: "loop2".into() });

    b.block("ea2", x(n.ea_in, GROUND, n.ctrl, GROUND, sw(Behavioral::tanh(lo.gm_ea2, lo.i_ea2_max), tanh_hi(hi.gm_ea2, hi.i_ea2_max))));
    b.block("roEa2", x(n.ctrl, n.vcb, n.ctrl, n.vcb, sw(Behavioral::lin(1.0 / lo.ro_ea2, 0.0), lin(1.0 / hi.ro_ea2, 0.0))));
    b.add(Element::Capacitor { a: n.ctrl, b: GROUND, farads: params.c_comp });

    b.add(Element::BreakPort { from: n.out, to: n.out_sense, label: "loop1".into() });
    b.block(
        "sense",
        x(n.out_sense, n.vref, GROUND, n.d, sw(Behavioral::tanh(lo.gm_sense, blo.sense_limit), tanh_hi(hi.gm_sense, bhi.sense_limit))),
    );
    b.block(
        "ctrl",
        x(n.ctrl, n.vcb, n.d, GROUND, sw(Behavioral::tanh(lo.gm_ctrl, blo.sense_limit), tanh_hi(hi.gm_ctrl, bhi.sense_limit))),
    );
    b.block("roSense", x(n.d, n.vin, n.d, n.vin, sw(Behavioral::lin(1.0 / lo.ro_sense, 0.0), lin(1.0 / hi.ro_sense, 0.0))));
    b.add(x(n.d, GROUND, n.d, GROUND, sw(Behavioral::lin(0.0, blo.drain_bias), lin(0.0, bhi.drain_bias))));
    b.add(Element::Capacitor { a: n.d, b: GROUND, farads: params.c_drain });

    let slew_hi = ModelParams {
        g: 1.0 / hi.ro_buffer,
        ipos: bhi.buffer_pull_up,
        ineg: bhi.buffer_pull_down,
        ..Default::default()
    };
    b.block(
        "buffer",
        x(n.d, n.g, GROUND, n.g, sw(Behavioral::slew(1.0 / lo.ro_buffer, blo.buffer_pull_up, blo.buffer_pull_down), slew_hi)),
    );
    b.add(Element::BreakPort { from: n.g, to: n.g_pass, label: "overall".into() });
    b.add(Element::Capacitor { a: n.g_pass, b: n.vin, farads: params.c_gate });

    let sq_hi = ModelParams { k: bhi.pass_strength, vth: params.pass_vth, ..Default::default() };
    b.block("pass", x(n.vin, n.g_pass, n.vin, n.out, sw(Behavioral::square(blo.pass_strength, params.pass_vth), sq_hi)));
    b.block("roPass", x(n.vin, n.out, n.vin, n.out, sw(Behavioral::lin(1.0 / lo.ro_pass, 0.0), lin(1.0 / hi.ro_pass, 0.0))));
    b.add(x(n.out, GROUND, n.out, GROUND, sw(Behavioral::lin(0.0, blo.output_bias), lin(0.0, bhi.output_bias))));
    b.add(Element::Capacitor { a: n.out, b: GROUND, farads: params.c_load });
    let load = b.add(Element::ISource { pos: n.out, neg: GROUND, dc: 0.0, ac: 0.0 });

    let mode0 = mode_from_ven(ven_wave.value(0.0), params.v_in);
    let nodes = nodeset(params, &n, mode0, load_wave.value(0.0).max(0.0));
    let stims = vec![Stimulus::digital(ven, ven_wave, "V_EN"), Stimulus::pwl(load, load_wave)];
    let ldo = LdoCircuit { circuit: b.c, nodes: n, supply, ven_source: ven, load_source: Some(load), blocks: b.blocks };
    Ok((ldo, stims, nodes))
}

/// Small-signal value of every named block: the conductance of resistors
/// and linear transconductors, or the slope of a behavioural block at the
/// given operating point.
pub fn linearized_blocks(ldo: &LdoCircuit, op: &OperatingPoint) -> Vec<(&'static str, f64)> {
    let v = &op.node_voltages;
    ldo.blocks
        .iter()
        .map(|(name, id)| {
            let value = match ldo.circuit.element(*id).expect("block exists") {
                Element::Resistor { ohms, .. } => 1.0 / ohms,
                Element::Vccs { siemens, .. } => *siemens,
                Element::NonlinearVccs { cp, cn, model, .. } => {
                    let p = model.active(|n| v[n.0]);
                    model.eval(p, v[cp.0] - v[cn.0]).1
                }
                other => unreachable!("block {name} is {other:?}"),
            };
            (*name, value)
        })
        .collect()
}

/// Single-node RC pole estimates in Hz, labelled by node.
pub fn pole_estimates(params: &LdoParams, mode: Mode, load: f64) -> Vec<(&'static str, f64)> {
    let m = params.mode(mode);
    let f = |r: f64, c: f64| 1.0 / (2.0 * PI * r * c);
    let r_out = if load > 0.0 {
        let rl = params.v_out_target / load;
        m.ro_pass * rl / (m.ro_pass + rl)
    } else {
        m.ro_pass
    };
    vec![
        ("V_CTRL", f(m.ro_ea2, params.c_comp)),
        ("V_EA", f(m.ro_ea1, params.c_ea)),
        ("V_D", f(m.ro_sense, params.c_drain)),
        ("V_G", f(m.ro_buffer, params.c_gate)),
        ("V_OUT", f(r_out, params.c_load)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_signal_validates_with_expected_labels() {
        let p = LdoParams::default();
        let ldo = build_small_signal(&p, Mode::High, 15e-3).unwrap();
        assert!(ldo.circuit.validate().is_ok(), "{:?}", ldo.circuit.validate());
        for label in ["V_EA", "V_CTRL", "V_D", "V_G", "V_OUT"] {
            assert!(ldo.circuit.node(label).is_some(), "{label}");
        }
        let mut ports = ldo.circuit.break_labels();
        ports.sort();
        assert_eq!(ports, vec!["loop1", "loop2", "overall"]);
        assert_eq!(ldo.blocks.len(), BLOCKS.len());
    }

    #[test]
    fn load_range_is_enforced() {
        let p = LdoParams::default();
        assert!(matches!(build_small_signal(&p, Mode::Low, 1e-3), Err(Error::LoadOutOfRange { mode: "low", .. })));
        assert!(matches!(build_small_signal(&p, Mode::High, 1e-3), Err(Error::LoadOutOfRange { mode: "high", .. })));
        assert!(build_small_signal(&p, Mode::Low, 0.0).is_ok());
    }

    #[test]
    fn transient_requires_ven() {
        let p = LdoParams::default();
        let s = LdoStimuli { load: Some(Pwl::constant(0.0)), ven: None };
        assert!(matches!(build_transient(&p, &s), Err(Error::Config(_))));
        let s = LdoStimuli { load: Some(Pwl::constant(0.0)), ven: Some(Pwl::constant(0.0)) };
        let (ldo, stims, _) = build_transient(&p, &s).unwrap();
        assert!(ldo.circuit.validate().is_ok(), "{:?}", ldo.circuit.validate());
        assert_eq!(stims.len(), 2);
    }

    #[test]
    fn dominant_pole_at_ctrl() {
        let p = LdoParams::default();
        let poles = pole_estimates(&p, Mode::Low, 0.0);
        let ctrl = poles[0].1;
        assert!(poles[1..].iter().all(|(_, f)| ctrl < f / 10.0), "{poles:?}");
    }
}
