//! Modified nodal analysis: unknown layout and matrix assembly.
//!
//! Unknowns are the non-ground node voltages (node `k` at index `k - 1`)
//! followed by one branch current per voltage source and per closed break
//! port, in element order.

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{self, DenseMatrix, Scalar, SingularPivot};
use crate::netlist::{Circuit, Element, ElementId, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    node_count: usize,
    branch: Vec<Option<usize>>,
    size: usize,
}

impl Layout {
    pub fn new(circuit: &Circuit) -> Self {
        let node_count = circuit.node_count();
        let mut next = node_count - 1;
        let branch = circuit
            .elements()
            .iter()
            .map(|e| {
                e.has_branch().then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Self { node_count, branch, size: next }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn node_unknowns(&self) -> usize {
        self.node_count - 1
    }

    #[inline]
    pub fn idx(&self, node: NodeId) -> Option<usize> {
        (node.0 != 0).then(|| node.0 - 1)
    }

    pub fn branch(&self, id: ElementId) -> Option<usize> {
        self.branch.get(id.0).copied().flatten()
    }

    /// Node voltages (ground included at index 0) from a solution vector.
    pub fn node_voltages<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        std::iter::once(T::zero()).chain(x[..self.node_count - 1].iter().copied()).collect()
    }

    /// Maps a failed pivot back to something a user can act on.
    pub fn describe(&self, circuit: &Circuit, pivot: SingularPivot) -> String {
        if pivot.index < self.node_count - 1 {
            return circuit.node_name(NodeId(pivot.index + 1));
        }
        match self.branch.iter().position(|b| *b == Some(pivot.index)) {
            Some(e) => format!("branch current of element {e}"),
            None => format!("unknown {}", pivot.index),
        }
    }

    pub fn singular(&self, circuit: &Circuit, pivot: SingularPivot, context: String) -> Error {
        Error::Singular { pivot: self.describe(circuit, pivot), context }
    }
}

#[inline]
pub(crate) fn volt(x: &[f64], node: NodeId) -> f64 {
    if node.0 == 0 {
        0.0
    } else {
        x[node.0 - 1]
    }
}

struct Stamper<'a, T: Scalar> {
    layout: &'a Layout,
    a: DenseMatrix<T>,
    b: Vec<T>,
}

impl<'a, T: Scalar> Stamper<'a, T> {
    fn new(layout: &'a Layout) -> Self {
        Self { layout, a: DenseMatrix::zeros(layout.size), b: vec![T::zero(); layout.size] }
    }

    fn admittance(&mut self, p: NodeId, n: NodeId, y: T) {
        let (ip, in_) = (self.layout.idx(p), self.layout.idx(n));
        if let Some(i) = ip {
            self.a.add(i, i, y);
        }
        if let Some(j) = in_ {
            self.a.add(j, j, y);
        }
        if let (Some(i), Some(j)) = (ip, in_) {
            self.a.add(i, j, -y);
            self.a.add(j, i, -y);
        }
    }

    fn transconductance(&mut self, cp: NodeId, cn: NodeId, op: NodeId, on: NodeId, g: T) {
        for (out, so) in [(op, T::one()), (on, -T::one())] {
            let Some(r) = self.layout.idx(out) else { continue };
            for (ctrl, sc) in [(cp, T::one()), (cn, -T::one())] {
                if let Some(c) = self.layout.idx(ctrl) {
                    self.a.add(r, c, so * sc * g);
                }
            }
        }
    }

    /// Current `i` flowing from `p` through the element into `n`.
    fn current(&mut self, p: NodeId, n: NodeId, i: T) {
        if let Some(r) = self.layout.idx(p) {
            self.b[r] = self.b[r] - i;
        }
        if let Some(r) = self.layout.idx(n) {
            self.b[r] = self.b[r] + i;
        }
    }

    fn voltage_branch(&mut self, k: usize, p: NodeId, n: NodeId, v: T) {
        if let Some(i) = self.layout.idx(p) {
            self.a.add(i, k, T::one());
            self.a.add(k, i, T::one());
        }
        if let Some(j) = self.layout.idx(n) {
            self.a.add(j, k, -T::one());
            self.a.add(k, j, -T::one());
        }
        self.b[k] = self.b[k] + v;
    }
}

/// How capacitors enter a real-valued assembly.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CapStamp<'a> {
    /// DC: capacitors are open circuits.
    Open,
    /// Companion model per element index: conductance and the equivalent
    /// current injected into terminal `a`.
    Companion(&'a [(f64, f64)]),
}

/// Linearised real system at iterate `x`.
///
/// `sources[i]` is the value of element `i` when it is an independent
/// source (ignored otherwise). `gmin` is a small conductance from every node
/// to ground, zero in normal operation.
pub(crate) fn assemble_real(
    circuit: &Circuit,
    layout: &Layout,
    x: &[f64],
    sources: &[f64],
    caps: CapStamp<'_>,
) -> (DenseMatrix<f64>, Vec<f64>) {
    let mut s = Stamper::new(layout);
    for (i, e) in circuit.elements().iter().enumerate() {
        match e {
            Element::Resistor { a, b, ohms } => s.admittance(*a, *b, 1.0 / ohms),
            Element::Capacitor { a, b, .. } => {
                if let CapStamp::Companion(c) = caps {
                    let (geq, ieq) = c[i];
                    s.admittance(*a, *b, geq);
                    // `ieq` enters node a, i.e. flows b -> a.
                    s.current(*b, *a, ieq);
                }
            }
            Element::Vccs { cp, cn, op, on, siemens } => s.transconductance(*cp, *cn, *op, *on, *siemens),
            Element::VSource { pos, neg, .. } => {
                let k = layout.branch[i].expect("voltage source has a branch");
                s.voltage_branch(k, *pos, *neg, sources[i]);
            }
            Element::ISource { pos, neg, .. } => s.current(*pos, *neg, sources[i]),
            Element::NonlinearVccs { cp, cn, op, on, model } => {
                let p = model.active(|n| volt(x, n));
                let vc = volt(x, *cp) - volt(x, *cn);
                let (i_op, g) = model.eval(p, vc);
                s.transconductance(*cp, *cn, *op, *on, g);
                s.current(*op, *on, i_op - g * vc);
            }
            Element::BreakPort { from, to, .. } => {
                let k = layout.branch[i].expect("break port has a branch");
                s.voltage_branch(k, *from, *to, 0.0);
            }
        }
    }
    (s.a, s.b)
}

/// KCL/branch residual `A x - b` split into its node and branch parts,
/// each reduced to a max-abs norm.
pub(crate) fn residual(a: &DenseMatrix<f64>, b: &[f64], x: &[f64], node_unknowns: usize) -> (f64, f64) {
    let ax = a.mul_vec(x);
    let mut node = 0.0_f64;
    let mut branch = 0.0_f64;
    for (k, (l, r)) in ax.iter().zip(b).enumerate() {
        let d = (l - r).abs();
        if k < node_unknowns {
            node = node.max(d);
        } else {
            branch = branch.max(d);
        }
    }
    (node, branch)
}

/// Small-signal complex system at angular frequency `omega`, linearised
/// around node voltages `v_op` (ground included). `ac[i]` is the AC
/// excitation of element `i` when it is a source.
pub(crate) fn assemble_ac(
    circuit: &Circuit,
    layout: &Layout,
    v_op: &[f64],
    omega: f64,
    ac: &[f64],
) -> (DenseMatrix<Complex64>, Vec<Complex64>) {
    let mut s = Stamper::<Complex64>::new(layout);
    let re = Complex64::from_real;
    for (i, e) in circuit.elements().iter().enumerate() {
        match e {
            Element::Resistor { a, b, ohms } => s.admittance(*a, *b, re(1.0 / ohms)),
            Element::Capacitor { a, b, farads } => s.admittance(*a, *b, Complex64::new(0.0, omega * farads)),
            Element::Vccs { cp, cn, op, on, siemens } => s.transconductance(*cp, *cn, *op, *on, re(*siemens)),
            Element::VSource { pos, neg, .. } => {
                let k = layout.branch[i].expect("voltage source has a branch");
                s.voltage_branch(k, *pos, *neg, re(ac[i]));
            }
            Element::ISource { pos, neg, .. } => s.current(*pos, *neg, re(ac[i])),
            Element::NonlinearVccs { cp, cn, op, on, model } => {
                let p = model.active(|n| v_op[n.0]);
                let (_, g) = model.eval(p, v_op[cp.0] - v_op[cn.0]);
                s.transconductance(*cp, *cn, *op, *on, re(g));
            }
            Element::BreakPort { from, to, .. } => {
                let k = layout.branch[i].expect("break port has a branch");
                s.voltage_branch(k, *from, *to, Complex64::from_real(0.0));
            }
        }
    }
    (s.a, s.b)
}

/// Complex MNA matrix of a circuit at one frequency, exposed for structural
/// checks such as symmetry of passive networks.
pub fn ac_matrix(circuit: &Circuit, v_op: &[f64], freq_hz: f64) -> DenseMatrix<Complex64> {
    let layout = Layout::new(circuit);
    let ac = vec![0.0; circuit.elements().len()];
    assemble_ac(circuit, &layout, v_op, 2.0 * std::f64::consts::PI * freq_hz, &ac).0
}

pub(crate) fn solve_or_name<T: Scalar>(
    circuit: &Circuit,
    layout: &Layout,
    a: DenseMatrix<T>,
    b: Vec<T>,
    context: impl FnOnce() -> String,
) -> Result<Vec<T>, Error> {
    linalg::solve(a, b).map_err(|p| layout.singular(circuit, p, context()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::GROUND;

    #[test]
    fn layout_places_branches_after_nodes() {
        let mut c = Circuit::with_nodes(3);
        c.add_element(Element::Resistor { a: NodeId(1), b: NodeId(2), ohms: 1.0 }).unwrap();
        c.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: 1.0, ac: 0.0 }).unwrap();
        c.add_element(Element::BreakPort { from: NodeId(2), to: NodeId(3), label: "l".into() }).unwrap();
        let l = Layout::new(&c);
        assert_eq!(l.size(), 5);
        assert_eq!(l.branch(ElementId(1)), Some(3));
        assert_eq!(l.branch(ElementId(2)), Some(4));
        assert_eq!(l.branch(ElementId(0)), None);
    }

    #[test]
    fn singular_pivot_names_the_node() {
        let mut c = Circuit::with_nodes(1);
        let n1 = c.add_node("V_A");
        let n2 = c.add_node("V_FLOAT");
        c.add_element(Element::Resistor { a: n1, b: GROUND, ohms: 1.0 }).unwrap();
        c.add_element(Element::Capacitor { a: n2, b: GROUND, farads: 1.0 }).unwrap();
        let layout = Layout::new(&c);
        let x = vec![0.0; layout.size()];
        let sources = vec![0.0; 2];
        let (a, b) = assemble_real(&c, &layout, &x, &sources, CapStamp::Open);
        let err = solve_or_name(&c, &layout, a, b, String::new).unwrap_err();
        assert!(err.to_string().contains("V_FLOAT"), "{err}");
    }
}
