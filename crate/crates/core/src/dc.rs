//! DC operating point by damped Newton iteration.

use crate::error::{Error, Result};
use crate::mna::{self, CapStamp, Layout};
use crate::netlist::{Circuit, Element, ElementId, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct DcOptions {
    /// Voltage tolerance; the KCL residual bound is this times the largest
    /// diagonal conductance.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial guesses for selected nodes.
    pub nodeset: Vec<(NodeId, f64)>,
}

impl Default for DcOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100, nodeset: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// Indexed by node; entry 0 is ground.
    pub node_voltages: Vec<f64>,
    /// Branch current of every voltage source and closed break port,
    /// flowing from the positive terminal through the element.
    pub branch_currents: Vec<(ElementId, f64)>,
    pub iterations: usize,
}

impl OperatingPoint {
    pub fn voltage(&self, node: NodeId) -> f64 {
        self.node_voltages[node.0]
    }

    pub(crate) fn from_solution(circuit: &Circuit, layout: &Layout, x: &[f64], iterations: usize) -> Self {
        let branch_currents = (0..circuit.elements().len())
            .filter_map(|i| layout.branch(ElementId(i)).map(|k| (ElementId(i), x[k])))
            .collect();
        Self { node_voltages: layout.node_voltages(x), branch_currents, iterations }
    }
}

/// Damped Newton solve of the (possibly companion-augmented) system.
/// Returns the solution and the iteration count.
pub(crate) fn newton(
    circuit: &Circuit,
    layout: &Layout,
    x0: Vec<f64>,
    sources: &[f64],
    caps: CapStamp<'_>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let nu = layout.node_unknowns();
    let mut x = x0;
    let (mut a, mut b) = mna::assemble_real(circuit, layout, &x, sources, caps);
    let (mut rn, mut rb) = mna::residual(&a, &b, &x, nu);

    for iter in 1..=max_iter {
        let gscale = (0..nu).map(|k| a.get(k, k).abs()).fold(0.0_f64, f64::max).max(1e-12);
        let target = mna::solve_or_name(circuit, layout, a.clone(), b.clone(), String::new)?;
        let dx: Vec<f64> = target.iter().zip(&x).map(|(t, v)| t - v).collect();
        let norm0 = rn / gscale + rb;

        let mut lambda = 1.0;
        let mut trial;
        let mut halvings = 0;
        loop {
            trial = x.iter().zip(&dx).map(|(v, d)| v + lambda * d).collect::<Vec<_>>();
            let (ta, tb) = mna::assemble_real(circuit, layout, &trial, sources, caps);
            let (tn, tbr) = mna::residual(&ta, &tb, &trial, nu);
            let better = tn / gscale + tbr <= norm0 || !norm0.is_finite();
            if better || halvings == 10 {
                a = ta;
                b = tb;
                rn = tn;
                rb = tbr;
                break;
            }
            lambda *= 0.5;
            halvings += 1;
        }
        let step = dx[..nu].iter().fold(0.0_f64, |m, d| m.max(d.abs())) * lambda;
        x = trial;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NoConvergence { iterations: iter, residual: f64::INFINITY });
        }
        if step <= tol && rn <= tol * gscale && rb <= tol {
            return Ok((x, iter));
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rn })
}

pub(crate) fn source_values(circuit: &Circuit, scale: f64) -> Vec<f64> {
    circuit
        .elements()
        .iter()
        .map(|e| match e {
            Element::VSource { dc, .. } | Element::ISource { dc, .. } => dc * scale,
            _ => 0.0,
        })
        .collect()
}

pub(crate) fn initial_guess(layout: &Layout, nodeset: &[(NodeId, f64)]) -> Vec<f64> {
    let mut x = vec![0.0; layout.size()];
    for (n, v) in nodeset {
        if let Some(k) = layout.idx(*n) {
            if k < layout.node_unknowns() {
                x[k] = *v;
            }
        }
    }
    x
}

/// Operating point with explicit sources, falling back to source stepping
/// when plain Newton fails to converge.
pub(crate) fn solve_dc(circuit: &Circuit, layout: &Layout, sources: &[f64], opts: &DcOptions) -> Result<(Vec<f64>, usize)> {
    let x0 = initial_guess(layout, &opts.nodeset);
    let first = newton(circuit, layout, x0.clone(), sources, CapStamp::Open, opts.tol, opts.max_iter);
    let err = match first {
        Ok(sol) => return Ok(sol),
        Err(e @ Error::Singular { .. }) => return Err(e),
        Err(e) => e,
    };

    // Source stepping: ramp every independent source from zero.
    let mut x = x0;
    let mut total = 0;
    let mut scale = 0.0_f64;
    let mut step = 0.1_f64;
    while scale < 1.0 {
        let next = (scale + step).min(1.0);
        let scaled: Vec<f64> = sources.iter().map(|v| v * next).collect();
        match newton(circuit, layout, x.clone(), &scaled, CapStamp::Open, opts.tol, opts.max_iter) {
            Ok((sol, it)) => {
                x = sol;
                total += it;
                scale = next;
                step = (step * 2.0).min(0.25);
            }
            Err(Error::Singular { pivot, context }) => return Err(Error::Singular { pivot, context }),
            Err(_) if step > 1e-4 => step *= 0.25,
            Err(_) => return Err(err),
        }
    }
    Ok((x, total))
}

pub fn dc_operating_point(circuit: &Circuit, newton_tol: f64, max_iter: usize) -> Result<OperatingPoint> {
    dc_operating_point_with(circuit, &DcOptions { tol: newton_tol, max_iter, nodeset: Vec::new() })
}

pub fn dc_operating_point_with(circuit: &Circuit, opts: &DcOptions) -> Result<OperatingPoint> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("Newton tolerance and iteration limit must be positive".into()));
    }
    circuit.validate().into_result()?;
    let layout = Layout::new(circuit);
    let sources = source_values(circuit, 1.0);
    let (x, iterations) = solve_dc(circuit, &layout, &sources, opts)?;
    Ok(OperatingPoint::from_solution(circuit, &layout, &x, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Behavioral, GROUND};

    #[test]
    fn symmetric_divider_gives_midpoint() {
        let mut c = Circuit::with_nodes(3);
        c.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: 1.5, ac: 0.0 }).unwrap();
        c.add_element(Element::Resistor { a: NodeId(1), b: NodeId(2), ohms: 1e3 }).unwrap();
        c.add_element(Element::Resistor { a: NodeId(2), b: GROUND, ohms: 1e3 }).unwrap();
        let op = dc_operating_point(&c, 1e-12, 50).unwrap();
        assert!((op.voltage(NodeId(2)) - 0.75).abs() < 1e-12);
        // 0.75 mA leaves the positive terminal into the divider, so the
        // branch current through the source is -0.75 mA.
        assert!((op.branch_currents[0].1 + 0.75e-3).abs() < 1e-15);
    }

    #[test]
    fn sourceless_network_is_all_zero() {
        let mut c = Circuit::with_nodes(3);
        c.add_element(Element::Resistor { a: NodeId(1), b: NodeId(2), ohms: 1e3 }).unwrap();
        c.add_element(Element::Resistor { a: NodeId(2), b: GROUND, ohms: 2e3 }).unwrap();
        c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 5e3 }).unwrap();
        let op = dc_operating_point(&c, 1e-12, 50).unwrap();
        assert!(op.node_voltages.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn floating_circuit_is_rejected_before_solving() {
        let mut c = Circuit::with_nodes(3);
        c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 1e3 }).unwrap();
        c.add_element(Element::ISource { pos: GROUND, neg: NodeId(2), dc: 1e-3, ac: 0.0 }).unwrap();
        assert!(matches!(dc_operating_point(&c, 1e-9, 50), Err(Error::Structural(_))));
    }

    #[test]
    fn steep_tanh_needs_damping_but_converges() {
        // A high-gain saturating stage driving a resistor in feedback.
        let mut c = Circuit::with_nodes(3);
        c.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: 0.3, ac: 0.0 }).unwrap();
        c.add_element(Element::NonlinearVccs {
            cp: NodeId(1),
            cn: NodeId(2),
            op: GROUND,
            on: NodeId(2),
            model: Behavioral::tanh(10.0, 1e-3),
        })
        .unwrap();
        c.add_element(Element::Resistor { a: NodeId(2), b: GROUND, ohms: 1e3 }).unwrap();
        let op = dc_operating_point(&c, 1e-12, 100).unwrap();
        let v2 = op.voltage(NodeId(2));
        let kcl = 1e-3 * (10.0 * (0.3 - v2) / 1e-3).tanh() - v2 / 1e3;
        assert!(kcl.abs() < 1e-12);
    }
}
