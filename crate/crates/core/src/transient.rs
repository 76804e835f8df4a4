//! Adaptive-step transient analysis.
//!
//! Trapezoidal integration with a backward-Euler step at t = 0 and after
//! every stimulus breakpoint. The step is controlled by a divided-difference
//! estimate of the trapezoidal truncation error and always lands exactly on
//! breakpoints.

use std::fmt::Write as _;

use crate::dc::{self, newton, DcOptions};
use crate::error::{Error, Result};
use crate::mna::{CapStamp, Layout};
use crate::netlist::{Circuit, Element, ElementId, NodeId};
use crate::units::sci9;

const MIN_STEP: f64 = 1e-15;
const NEWTON_ITER: usize = 40;

/// Piecewise-linear waveform, held constant before the first and after the
/// last point.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl {
    points: Vec<(f64, f64)>,
}

impl Pwl {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("waveform needs at least one point".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument("waveform points must be finite with t >= 0".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument("waveform times must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        let last = p[p.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let i = p.partition_point(|(pt, _)| *pt <= t) - 1;
        let ((t0, v0), (t1, v1)) = (p[i], p[i + 1]);
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Times at which the waveform crosses the midpoint of its swing,
    /// tagged with the direction (`true` = rising).
    pub fn half_swing_crossings(&self) -> Vec<(f64, bool)> {
        let lo = self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Vec::new();
        }
        let mid = 0.5 * (lo + hi);
        self.points
            .windows(2)
            .filter_map(|w| {
                let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                let rising = v0 <= mid && v1 > mid;
                let falling = v0 > mid && v1 <= mid;
                (rising || falling).then(|| (t0 + (mid - v0) * (t1 - t0) / (v1 - v0), rising))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sine {
    pub amplitude: f64,
    pub freq_hz: f64,
}

/// Drives the value of one independent V or I source over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub source: ElementId,
    pub waveform: Pwl,
    pub sine: Option<Sine>,
    /// When set, half-swing crossings are recorded as events under this name.
    pub digital: Option<String>,
}

impl Stimulus {
    pub fn pwl(source: ElementId, waveform: Pwl) -> Self {
        Self { source, waveform, sine: None, digital: None }
    }

    pub fn digital(source: ElementId, waveform: Pwl, label: &str) -> Self {
        Self { source, waveform, sine: None, digital: Some(label.to_string()) }
    }

    pub fn value(&self, t: f64) -> f64 {
        let rider = self.sine.map_or(0.0, |s| s.amplitude * (2.0 * std::f64::consts::PI * s.freq_hz * t).sin());
        self.waveform.value(t) + rider
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientOptions {
    pub t_end: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_step: f64,
    /// Skip the DC solve and start from `nodeset` (zero elsewhere).
    pub uic: bool,
    pub nodeset: Vec<(NodeId, f64)>,
}

impl TransientOptions {
    pub fn new(t_end: f64, tol_rel: f64, tol_abs: f64, max_step: f64) -> Self {
        Self { t_end, tol_rel, tol_abs, max_step, uic: false, nodeset: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientTrace {
    pub times: Vec<f64>,
    /// `node_voltages[node][sample]`; ground is included as a zero series.
    pub node_voltages: Vec<Vec<f64>>,
    /// Voltage-source branch currents and current-source values.
    pub branch_currents: Vec<(ElementId, Vec<f64>)>,
    pub events: Vec<(f64, String)>,
    pub labels: Vec<(String, NodeId)>,
    pub steps_rejected: usize,
}

impl TransientTrace {
    pub fn node(&self, node: NodeId) -> &[f64] {
        &self.node_voltages[node.0]
    }

    pub fn voltage(&self, label: &str) -> Option<&[f64]> {
        self.labels.iter().find(|(l, _)| l == label).map(|(_, n)| self.node(*n))
    }

    pub fn current(&self, id: ElementId) -> Option<&[f64]> {
        self.branch_currents.iter().find(|(e, _)| *e == id).map(|(_, v)| v.as_slice())
    }

    /// Samples with `t0 <= t < t1` (all remaining samples when `t1` is
    /// infinite), events filtered the same way.
    pub fn window(&self, t0: f64, t1: f64) -> TransientTrace {
        let lo = self.times.partition_point(|t| *t < t0);
        let hi = self.times.partition_point(|t| *t < t1);
        TransientTrace {
            times: self.times[lo..hi].to_vec(),
            node_voltages: self.node_voltages.iter().map(|s| s[lo..hi].to_vec()).collect(),
            branch_currents: self.branch_currents.iter().map(|(e, s)| (*e, s[lo..hi].to_vec())).collect(),
            events: self.events.iter().filter(|(t, _)| *t >= t0 && *t < t1).cloned().collect(),
            labels: self.labels.clone(),
            steps_rejected: self.steps_rejected,
        }
    }

    /// CSV with one column per labelled node, events as trailing comments.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_s");
        for (l, _) in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            s.push_str(&sci9(*t));
            for (_, n) in &self.labels {
                s.push(',');
                s.push_str(&sci9(self.node_voltages[n.0][k]));
            }
            s.push('\n');
        }
        for (t, label) in &self.events {
            let _ = writeln!(s, "# event,{},{label}", sci9(*t));
        }
        s
    }
}

pub fn simulate(
    circuit: &Circuit,
    stimuli: &[Stimulus],
    t_end: f64,
    tol_rel: f64,
    tol_abs: f64,
    max_step: f64,
) -> Result<TransientTrace> {
    simulate_with(circuit, stimuli, &TransientOptions::new(t_end, tol_rel, tol_abs, max_step))
}

struct Cap {
    element: usize,
    a: NodeId,
    b: NodeId,
    farads: f64,
    v: f64,
    i: f64,
}

fn check_options(opts: &TransientOptions) -> Result<()> {
    if !(opts.t_end > 0.0) || !opts.t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("end time must be > 0, got {}", opts.t_end)));
    }
    if !(opts.tol_rel > 0.0 && opts.tol_abs > 0.0 && opts.max_step > 0.0) {
        return Err(Error::InvalidArgument("tolerances and maximum step must be > 0".into()));
    }
    Ok(())
}

fn check_stimuli(circuit: &Circuit, stimuli: &[Stimulus]) -> Result<()> {
    for s in stimuli {
        match circuit.element(s.source) {
            Some(Element::VSource { .. }) | Some(Element::ISource { .. }) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "stimulus target {} is not an independent source",
                    s.source.0
                )))
            }
        }
    }
    Ok(())
}

/// Third divided difference over four (t, v) samples.
fn dd3(t: [f64; 4], v: [f64; 4]) -> f64 {
    let d1 = |i: usize| (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
    let d2 = |i: usize| (d1(i + 1) - d1(i)) / (t[i + 2] - t[i]);
    (d2(1) - d2(0)) / (t[3] - t[0])
}

pub fn simulate_with(circuit: &Circuit, stimuli: &[Stimulus], opts: &TransientOptions) -> Result<TransientTrace> {
    check_options(opts)?;
    circuit.validate().into_result()?;
    check_stimuli(circuit, stimuli)?;
    let layout = Layout::new(circuit);
    let nu = layout.node_unknowns();
    let t_end = opts.t_end;

    // Breakpoints: waveform corners, digital crossings, and the end time.
    let mut crossings: Vec<(f64, String)> = Vec::new();
    let mut bps: Vec<f64> = vec![t_end];
    for s in stimuli {
        bps.extend(s.waveform.points().iter().map(|p| p.0));
        if let Some(label) = &s.digital {
            for (t, rising) in s.waveform.half_swing_crossings() {
                bps.push(t);
                crossings.push((t, format!("{label} {}", if rising { "rise" } else { "fall" })));
            }
        }
    }
    bps.retain(|t| *t > 0.0 && *t <= t_end);
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    crossings.sort_by(|a, b| a.0.total_cmp(&b.0));

    let base = dc::source_values(circuit, 1.0);
    let sources_at = |t: f64| {
        let mut v = base.clone();
        for s in stimuli {
            v[s.source.0] = s.value(t);
        }
        v
    };

    let mut x = if opts.uic {
        dc::initial_guess(&layout, &opts.nodeset)
    } else {
        let dc_opts = DcOptions { nodeset: opts.nodeset.clone(), ..DcOptions::default() };
        dc::solve_dc(circuit, &layout, &sources_at(0.0), &dc_opts)?.0
    };

    let mut caps: Vec<Cap> = circuit
        .elements()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            Element::Capacitor { a, b, farads } => Some(Cap { element: i, a: *a, b: *b, farads: *farads, v: 0.0, i: 0.0 }),
            _ => None,
        })
        .collect();
    let vdiff = |x: &[f64], a: NodeId, b: NodeId| crate::mna::volt(x, a) - crate::mna::volt(x, b);
    for c in &mut caps {
        c.v = vdiff(&x, c.a, c.b);
    }

    let recorded: Vec<(ElementId, Option<usize>)> = circuit
        .elements()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            Element::VSource { .. } => Some((ElementId(i), layout.branch(ElementId(i)))),
            Element::ISource { .. } => Some((ElementId(i), None)),
            _ => None,
        })
        .collect();

    let mut trace = TransientTrace {
        times: Vec::new(),
        node_voltages: vec![Vec::new(); circuit.node_count()],
        branch_currents: recorded.iter().map(|(e, _)| (*e, Vec::new())).collect(),
        events: Vec::new(),
        labels: circuit.labels().to_vec(),
        steps_rejected: 0,
    };
    let record = |trace: &mut TransientTrace, t: f64, x: &[f64], src: &[f64]| {
        trace.times.push(t);
        trace.node_voltages[0].push(0.0);
        for k in 0..nu {
            trace.node_voltages[k + 1].push(x[k]);
        }
        for (slot, (e, branch)) in recorded.iter().enumerate() {
            let v = match branch {
                Some(k) => x[*k],
                None => src[e.0],
            };
            trace.branch_currents[slot].1.push(v);
        }
    };
    record(&mut trace, 0.0, &x, &sources_at(0.0));

    let first_step = |t: f64, next_bp: f64| (1e-3 * (next_bp - t)).min(1e-2 * opts.max_step);
    let mut t = 0.0;
    let mut next = 0usize;
    let mut h = first_step(0.0, bps[0]);
    let mut use_be = true;
    // Accepted (t, node voltages) since the last breakpoint, newest last.
    let mut hist: Vec<(f64, Vec<f64>)> = vec![(0.0, x[..nu].to_vec())];
    let mut companions = vec![(0.0, 0.0); circuit.elements().len()];
    let newton_tol = opts.tol_abs * 1e-2;

    while next < bps.len() {
        let bp = bps[next];
        let mut t_new = t + h;
        if t_new >= bp {
            t_new = bp;
        } else if t + 2.0 * h > bp {
            t_new = t + 0.5 * (bp - t);
        }
        let step = t_new - t;
        if step < MIN_STEP {
            return Err(stall(circuit, t, &hist));
        }

        for c in &caps {
            companions[c.element] = if use_be {
                let g = c.farads / step;
                (g, g * c.v)
            } else {
                let g = 2.0 * c.farads / step;
                (g, g * c.v + c.i)
            };
        }
        let src = sources_at(t_new);
        let solved = newton(circuit, &layout, x.clone(), &src, CapStamp::Companion(&companions), newton_tol, NEWTON_ITER);
        let x_new = match solved {
            Ok((sol, _)) => sol,
            Err(Error::NoConvergence { .. }) | Err(Error::Singular { .. }) => {
                trace.steps_rejected += 1;
                h = step * 0.5;
                if h < MIN_STEP {
                    return Err(stall(circuit, t, &hist));
                }
                continue;
            }
            Err(e) => return Err(e),
        };

        // Truncation error needs three accepted points since the breakpoint.
        let mut ratio = None;
        if !use_be && hist.len() >= 3 {
            let n = hist.len();
            let ts = [hist[n - 3].0, hist[n - 2].0, hist[n - 1].0, t_new];
            let mut worst = 0.0_f64;
            for k in 0..nu {
                let vs = [hist[n - 3].1[k], hist[n - 2].1[k], hist[n - 1].1[k], x_new[k]];
                let lte = step.powi(3) / 12.0 * (6.0 * dd3(ts, vs)).abs();
                let tol = (opts.tol_rel * x_new[k].abs()).max(opts.tol_abs);
                worst = worst.max(lte / tol);
            }
            if worst > 1.0 {
                trace.steps_rejected += 1;
                h = step * 0.5;
                if h < MIN_STEP {
                    return Err(stall(circuit, t, &hist));
                }
                continue;
            }
            ratio = Some(worst);
        }

        for c in &mut caps {
            let (g, ieq) = companions[c.element];
            let v = vdiff(&x_new, c.a, c.b);
            c.i = g * v - ieq;
            c.v = v;
        }
        x = x_new;
        t = t_new;
        record(&mut trace, t, &x, &src);

        if t == bp {
            while let Some(pos) = crossings.iter().position(|(tc, _)| *tc == t) {
                let (tc, label) = crossings.remove(pos);
                trace.events.push((tc, label));
            }
            next += 1;
            use_be = true;
            hist.clear();
            hist.push((t, x[..nu].to_vec()));
            if next < bps.len() {
                h = first_step(t, bps[next]);
            }
        } else {
            use_be = false;
            hist.push((t, x[..nu].to_vec()));
            if hist.len() > 3 {
                hist.remove(0);
            }
            h = match ratio {
                Some(r) if r < 0.125 => (2.0 * step).min(opts.max_step),
                _ => step.min(opts.max_step),
            };
        }
    }
    Ok(trace)
}

fn stall(circuit: &Circuit, t: f64, hist: &[(f64, Vec<f64>)]) -> Error {
    // Name the node that moved the most over the recent history.
    let node = match (hist.first(), hist.last()) {
        (Some(a), Some(b)) if !a.1.is_empty() => {
            let k = (0..a.1.len())
                .max_by(|&i, &j| (b.1[i] - a.1[i]).abs().total_cmp(&(b.1[j] - a.1[j]).abs()))
                .unwrap_or(0);
            circuit.node_name(NodeId(k + 1))
        }
        _ => "unknown".to_string(),
    };
    Error::Stall { time: t, node }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwl_interpolates_and_holds() {
        let w = Pwl::new(vec![(1.0, 0.0), (2.0, 10.0), (4.0, 10.0)]).unwrap();
        assert_eq!(w.value(0.0), 0.0);
        assert_eq!(w.value(1.5), 5.0);
        assert_eq!(w.value(2.0), 10.0);
        assert_eq!(w.value(9.0), 10.0);
        assert!(Pwl::new(vec![(1.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(Pwl::new(vec![]).is_err());
    }

    #[test]
    fn crossings_are_exact_midpoints() {
        let w = Pwl::new(vec![(0.0, 0.0), (1.0, 0.0), (2.0, 1.5), (4.0, 1.5), (5.0, 0.0)]).unwrap();
        assert_eq!(w.half_swing_crossings(), vec![(1.5, true), (4.5, false)]);
        assert!(Pwl::constant(1.0).half_swing_crossings().is_empty());
    }

    #[test]
    fn third_divided_difference_of_cubic() {
        let t = [0.0, 0.3, 1.1, 2.0];
        let v = t.map(|x: f64| 2.0 * x.powi(3) - x + 4.0);
        assert!((dd3(t, v) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_end_time() {
        let mut c = Circuit::with_nodes(2);
        c.add_element(Element::Resistor { a: NodeId(1), b: NodeId(0), ohms: 1.0 }).unwrap();
        assert!(matches!(simulate(&c, &[], 0.0, 1e-3, 1e-6, 1e-3), Err(Error::InvalidArgument(_))));
    }
}
