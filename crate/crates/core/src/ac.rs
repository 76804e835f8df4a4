//! Small-signal frequency-domain analysis: sweeps, transfer functions and
//! loop gain at break ports.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dc::{dc_operating_point_with, DcOptions, OperatingPoint};
use crate::error::{Error, Result};
use crate::mna::{self, Layout};
use crate::netlist::{Circuit, Element, ElementId, NodeId, GROUND};
use crate::units::sci9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySweep {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points_per_decade: usize,
}

impl FrequencySweep {
    pub fn new(start_hz: f64, stop_hz: f64, points_per_decade: usize) -> Result<Self> {
        let s = Self { start_hz, stop_hz, points_per_decade };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if !(self.start_hz > 0.0 && self.stop_hz > self.start_hz && self.stop_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sweep needs 0 < start < stop, got {} .. {}",
                self.start_hz, self.stop_hz
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::InvalidArgument("points per decade must be >= 1".into()));
        }
        Ok(())
    }

    /// Logarithmic grid from start to stop, both included exactly.
    pub fn grid(&self) -> Vec<f64> {
        let decades = (self.stop_hz / self.start_hz).log10();
        let intervals = ((decades * self.points_per_decade as f64) - 1e-9).ceil().max(1.0) as usize;
        let ratio = self.stop_hz / self.start_hz;
        let mut f: Vec<f64> = (0..=intervals)
            .map(|i| self.start_hz * ratio.powf(i as f64 / intervals as f64))
            .collect();
        f[0] = self.start_hz;
        f[intervals] = self.stop_hz;
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub freqs_hz: Vec<f64>,
    pub values: Vec<Complex64>,
}

pub fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

impl FrequencyResponse {
    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn mag_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| db(v.norm())).collect()
    }

    /// Phase in degrees with 360 degree jumps removed by continuity,
    /// starting from the principal value of the first sample.
    pub fn unwrapped_phase_deg(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.values.len());
        for v in &self.values {
            let p = v.arg().to_degrees();
            let unwrapped = match out.last() {
                None => p,
                Some(prev) => p + 360.0 * ((prev - p) / 360.0).round(),
            };
            out.push(unwrapped);
        }
        out
    }

    /// CSV with header `freq_hz,re,im,mag_db,phase_deg`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,re,im,mag_db,phase_deg\n");
        for ((f, v), p) in self.freqs_hz.iter().zip(&self.values).zip(self.unwrapped_phase_deg()) {
            let _ = writeln!(s, "{},{},{},{},{}", sci9(*f), sci9(v.re), sci9(v.im), sci9(db(v.norm())), sci9(p));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopGainResult {
    pub response: FrequencyResponse,
    pub dc_gain_db: f64,
    pub ugbw_hz: Option<f64>,
    pub phase_margin_deg: Option<f64>,
}

/// Maps an angle into (-180, 180].
pub fn wrap_deg(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

impl LoopGainResult {
    pub fn from_response(response: FrequencyResponse) -> Self {
        let mags: Vec<f64> = response.values.iter().map(|v| v.norm()).collect();
        let phase = response.unwrapped_phase_deg();
        let dc_gain_db = db(mags[0]);
        let crossing = (0..mags.len().saturating_sub(1)).find(|&i| mags[i] >= 1.0 && mags[i + 1] < 1.0);
        let (ugbw_hz, phase_margin_deg) = match crossing {
            None => (None, None),
            Some(i) => {
                let (l0, l1) = (mags[i].ln(), mags[i + 1].ln());
                let t = if l0 == l1 { 0.0 } else { l0 / (l0 - l1) };
                let (f0, f1) = (response.freqs_hz[i].ln(), response.freqs_hz[i + 1].ln());
                let fu = (f0 + t * (f1 - f0)).exp();
                let ph = phase[i] + t * (phase[i + 1] - phase[i]);
                (Some(fu), Some(wrap_deg(180.0 + ph)))
            }
        };
        Self { response, dc_gain_db, ugbw_hz, phase_margin_deg }
    }
}

fn operating_point(circuit: &Circuit) -> Result<OperatingPoint> {
    dc_operating_point_with(circuit, &DcOptions::default())
}

/// Node phasors (ground at index 0) at one frequency, using the AC
/// magnitudes stored on the circuit's sources.
pub fn node_phasors(circuit: &Circuit, op: &OperatingPoint, freq_hz: f64) -> Result<Vec<Complex64>> {
    let layout = Layout::new(circuit);
    let ac = ac_values(circuit);
    solve_at(circuit, &layout, &op.node_voltages, &ac, freq_hz)
}

fn ac_values(circuit: &Circuit) -> Vec<f64> {
    circuit
        .elements()
        .iter()
        .map(|e| match e {
            Element::VSource { ac, .. } | Element::ISource { ac, .. } => *ac,
            _ => 0.0,
        })
        .collect()
}

fn solve_at(circuit: &Circuit, layout: &Layout, v_op: &[f64], ac: &[f64], freq_hz: f64) -> Result<Vec<Complex64>> {
    let (a, b) = mna::assemble_ac(circuit, layout, v_op, 2.0 * PI * freq_hz, ac);
    let x = mna::solve_or_name(circuit, layout, a, b, || format!(" at {freq_hz:.6e} Hz"))?;
    Ok(layout.node_voltages(&x))
}

/// Solves every grid frequency in parallel and returns the node phasors in
/// grid order.
fn sweep_nodes(
    circuit: &Circuit,
    v_op: &[f64],
    ac: &[f64],
    freqs: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    let layout = Layout::new(circuit);
    freqs.par_iter().map(|&f| solve_at(circuit, &layout, v_op, ac, f)).collect()
}

fn source_ac(circuit: &Circuit, id: ElementId) -> Result<f64> {
    match circuit.element(id) {
        Some(Element::VSource { ac, .. }) | Some(Element::ISource { ac, .. }) => {
            if *ac == 0.0 {
                Err(Error::InvalidArgument(format!("source {} has zero AC magnitude", id.0)))
            } else {
                Ok(*ac)
            }
        }
        _ => Err(Error::InvalidArgument(format!("element {} is not an independent source", id.0))),
    }
}

pub fn ac_sweep(circuit: &Circuit, sweep: &FrequencySweep, input: ElementId, output: NodeId) -> Result<FrequencyResponse> {
    let op = operating_point(circuit)?;
    ac_sweep_at(circuit, &op, sweep, input, output)
}

/// `ac_sweep` around a precomputed operating point. Only `input` is
/// excited; every other AC source is zeroed.
pub fn ac_sweep_at(
    circuit: &Circuit,
    op: &OperatingPoint,
    sweep: &FrequencySweep,
    input: ElementId,
    output: NodeId,
) -> Result<FrequencyResponse> {
    sweep.check()?;
    let mag = source_ac(circuit, input)?;
    if output.0 >= circuit.node_count() {
        return Err(Error::InvalidArgument(format!("output node {} does not exist", output.0)));
    }
    let mut ac = vec![0.0; circuit.elements().len()];
    ac[input.0] = mag;
    let freqs = sweep.grid();
    let nodes = sweep_nodes(circuit, &op.node_voltages, &ac, &freqs)?;
    let values = nodes.iter().map(|v| v[output.0] / mag).collect();
    Ok(FrequencyResponse { freqs_hz: freqs, values })
}

/// Supply-to-output transfer `V(output)/V(supply)`; negative dB means
/// attenuation.
pub fn psr(circuit: &Circuit, sweep: &FrequencySweep, supply: ElementId, output: NodeId) -> Result<FrequencyResponse> {
    match circuit.element(supply) {
        Some(Element::VSource { .. }) => ac_sweep(circuit, sweep, supply, output),
        _ => Err(Error::InvalidArgument(format!("supply element {} is not a voltage source", supply.0))),
    }
}

pub fn psr_at(
    circuit: &Circuit,
    op: &OperatingPoint,
    sweep: &FrequencySweep,
    supply: ElementId,
    output: NodeId,
) -> Result<FrequencyResponse> {
    ac_sweep_at(circuit, op, sweep, supply, output)
}

/// Opens the named break port and returns the circuit used for loop-gain
/// evaluation: `to` is driven by an ideal AC source of `amplitude`, and
/// passive R/C elements hanging on `to` are replicated on `from` so the
/// forward path still sees its original load.
pub fn open_loop_circuit(circuit: &Circuit, label: &str, amplitude: f64) -> Result<(Circuit, NodeId)> {
    let (id, from, to) = circuit.break_port(label).ok_or_else(|| Error::MissingBreakPort(label.to_string()))?;
    let mut open = circuit.clone();
    for e in 0..open.elements().len() {
        if let Some(Element::VSource { ac, .. }) | Some(Element::ISource { ac, .. }) = open.element_mut(ElementId(e)) {
            *ac = 0.0;
        }
    }
    *open.element_mut(id).expect("break port exists") = Element::VSource { pos: to, neg: GROUND, dc: 0.0, ac: amplitude };
    let replicas: Vec<Element> = circuit
        .elements()
        .iter()
        .filter_map(|e| {
            let swap = |n: NodeId| if n == to { from } else { n };
            match e {
                Element::Resistor { a, b, ohms } if (*a == to) != (*b == to) && *a != from && *b != from => {
                    Some(Element::Resistor { a: swap(*a), b: swap(*b), ohms: *ohms })
                }
                Element::Capacitor { a, b, farads } if (*a == to) != (*b == to) && *a != from && *b != from => {
                    Some(Element::Capacitor { a: swap(*a), b: swap(*b), farads: *farads })
                }
                _ => None,
            }
        })
        .collect();
    for r in replicas {
        open.add_element(r)?;
    }
    Ok((open, from))
}

pub fn loop_gain(circuit: &Circuit, label: &str, sweep: &FrequencySweep) -> Result<LoopGainResult> {
    loop_gain_with(circuit, label, sweep, 1.0)
}

pub fn loop_gain_with(circuit: &Circuit, label: &str, sweep: &FrequencySweep, amplitude: f64) -> Result<LoopGainResult> {
    let op = operating_point(circuit)?;
    loop_gain_at(circuit, &op, label, sweep, amplitude)
}

/// Loop gain `T = -V(from)/V(to)` around a precomputed operating point of
/// the closed circuit.
pub fn loop_gain_at(
    circuit: &Circuit,
    op: &OperatingPoint,
    label: &str,
    sweep: &FrequencySweep,
    amplitude: f64,
) -> Result<LoopGainResult> {
    sweep.check()?;
    if !(amplitude.is_finite() && amplitude != 0.0) {
        return Err(Error::InvalidArgument("test amplitude must be finite and nonzero".into()));
    }
    let (open, from) = open_loop_circuit(circuit, label, amplitude)?;
    let freqs = sweep.grid();
    let ac = ac_values(&open);
    let nodes = sweep_nodes(&open, &op.node_voltages, &ac, &freqs)?;
    let values = nodes.iter().map(|v| -v[from.0] / amplitude).collect();
    Ok(LoopGainResult::from_response(FrequencyResponse { freqs_hz: freqs, values }))
}
