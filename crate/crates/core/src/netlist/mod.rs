//! Circuit data model: nodes, elements and structural validation.

mod model;
mod text;

pub use model::{Behavioral, ModeSelect, ModelKind, ModelParams};
pub use text::{parse_netlist, write_netlist};

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

pub const GROUND: NodeId = NodeId(0);

impl NodeId {
    pub fn is_ground(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Resistor { a: NodeId, b: NodeId, ohms: f64 },
    Capacitor { a: NodeId, b: NodeId, farads: f64 },
    /// Current `siemens * (V(cp) - V(cn))` flows from `op` through the
    /// element into `on`.
    Vccs { cp: NodeId, cn: NodeId, op: NodeId, on: NodeId, siemens: f64 },
    VSource { pos: NodeId, neg: NodeId, dc: f64, ac: f64 },
    /// Current flows from `pos` through the source into `neg`.
    ISource { pos: NodeId, neg: NodeId, dc: f64, ac: f64 },
    /// Same orientation as `Vccs`, with a behavioural current law.
    NonlinearVccs { cp: NodeId, cn: NodeId, op: NodeId, on: NodeId, model: Behavioral },
    /// A wire from `from` to `to` that loop-gain analysis can cut.
    BreakPort { from: NodeId, to: NodeId, label: String },
}

impl Element {
    pub fn nodes(&self) -> Vec<NodeId> {
        match self {
            Element::Resistor { a, b, .. } | Element::Capacitor { a, b, .. } => vec![*a, *b],
            Element::VSource { pos, neg, .. } | Element::ISource { pos, neg, .. } => vec![*pos, *neg],
            Element::Vccs { cp, cn, op, on, .. } | Element::NonlinearVccs { cp, cn, op, on, .. } => {
                vec![*cp, *cn, *op, *on]
            }
            Element::BreakPort { from, to, .. } => vec![*from, *to],
        }
    }

    /// Elements that contribute an extra branch-current unknown in MNA.
    pub fn has_branch(&self) -> bool {
        matches!(self, Element::VSource { .. } | Element::BreakPort { .. })
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Element::Resistor { .. } => "resistor",
            Element::Capacitor { .. } => "capacitor",
            Element::Vccs { .. } => "vccs",
            Element::VSource { .. } => "voltage source",
            Element::ISource { .. } => "current source",
            Element::NonlinearVccs { .. } => "nonlinear vccs",
            Element::BreakPort { .. } => "break port",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    node_count: usize,
    elements: Vec<Element>,
    // A list rather than a map so duplicate labels survive until `validate`.
    labels: Vec<(String, NodeId)>,
}

impl Default for Circuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Circuit {
    /// A circuit holding only the ground node.
    pub fn new() -> Self {
        Self::with_nodes(1)
    }

    pub fn with_nodes(node_count: usize) -> Self {
        Self { node_count: node_count.max(1), elements: Vec::new(), labels: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, id: ElementId) -> Option<&Element> {
        self.elements.get(id.0)
    }

    pub fn element_mut(&mut self, id: ElementId) -> Option<&mut Element> {
        self.elements.get_mut(id.0)
    }

    pub fn labels(&self) -> &[(String, NodeId)] {
        &self.labels
    }

    /// Allocates a fresh node and gives it a label.
    pub fn add_node(&mut self, label: &str) -> NodeId {
        let id = NodeId(self.node_count);
        self.node_count += 1;
        self.labels.push((label.to_string(), id));
        id
    }

    pub fn set_label(&mut self, label: &str, node: NodeId) -> Result<()> {
        if node.0 >= self.node_count {
            return Err(Error::UnknownNode { element: usize::MAX, node: node.0, node_count: self.node_count });
        }
        self.labels.push((label.to_string(), node));
        Ok(())
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().find(|(l, _)| l == label).map(|(_, n)| *n)
    }

    pub fn node_label(&self, node: NodeId) -> Option<&str> {
        self.labels.iter().find(|(_, n)| *n == node).map(|(l, _)| l.as_str())
    }

    /// Human-readable node name: its label when it has one.
    pub fn node_name(&self, node: NodeId) -> String {
        match self.node_label(node) {
            Some(l) => format!("{l} (node {})", node.0),
            None => format!("node {}", node.0),
        }
    }

    /// Appends an element. Terminals must name existing nodes, except that
    /// the next unallocated index is accepted and allocates that node.
    pub fn add_element(&mut self, element: Element) -> Result<ElementId> {
        let id = self.elements.len();
        let max = element.nodes().iter().map(|n| n.0).max().unwrap_or(0);
        if max > self.node_count {
            return Err(Error::UnknownNode { element: id, node: max, node_count: self.node_count });
        }
        if max == self.node_count {
            self.node_count += 1;
        }
        self.elements.push(element);
        Ok(ElementId(id))
    }

    pub fn break_port(&self, label: &str) -> Option<(ElementId, NodeId, NodeId)> {
        self.elements.iter().enumerate().find_map(|(i, e)| match e {
            Element::BreakPort { from, to, label: l } if l == label => Some((ElementId(i), *from, *to)),
            _ => None,
        })
    }

    pub fn break_labels(&self) -> Vec<String> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::BreakPort { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect()
    }

    /// Sets the AC magnitude of a V or I source.
    pub fn set_ac(&mut self, id: ElementId, magnitude: f64) -> Result<()> {
        match self.elements.get_mut(id.0) {
            Some(Element::VSource { ac, .. }) | Some(Element::ISource { ac, .. }) => {
                *ac = magnitude;
                Ok(())
            }
            _ => Err(Error::InvalidArgument(format!("element {} is not an independent source", id.0))),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    FloatingNode { node: NodeId, label: Option<String> },
    NonPositiveValue { element: ElementId, kind: &'static str, value: f64 },
    NonFiniteValue { element: ElementId, kind: &'static str },
    DuplicateLabel { label: String },
    UnknownNode { element: ElementId, node: NodeId },
    InvalidModel { element: ElementId, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FloatingNode { node, label: Some(l) } => {
                write!(f, "node {} ({l}) has no path to ground", node.0)
            }
            Violation::FloatingNode { node, label: None } => write!(f, "node {} has no path to ground", node.0),
            Violation::NonPositiveValue { element, kind, value } => {
                write!(f, "element {}: {kind} value {value} must be > 0", element.0)
            }
            Violation::NonFiniteValue { element, kind } => write!(f, "element {}: {kind} value is not finite", element.0),
            Violation::DuplicateLabel { label } => write!(f, "label `{label}` is used more than once"),
            Violation::UnknownNode { element, node } => write!(f, "element {} references unknown node {}", element.0, node.0),
            Violation::InvalidModel { element, reason } => write!(f, "element {}: {reason}", element.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
            Err(Error::Structural(msg.join("; ")))
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the smaller root so ground (0) stays the representative.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

fn validate(circuit: &Circuit) -> ValidationReport {
    let mut violations = Vec::new();
    let n = circuit.node_count;
    let mut parent: Vec<usize> = (0..n).collect();

    for (i, e) in circuit.elements.iter().enumerate() {
        let id = ElementId(i);
        if let Some(bad) = e.nodes().into_iter().find(|x| x.0 >= n) {
            violations.push(Violation::UnknownNode { element: id, node: bad });
            continue;
        }
        let mut check_positive = |value: f64| {
            if !value.is_finite() {
                violations.push(Violation::NonFiniteValue { element: id, kind: e.kind_name() });
            } else if value <= 0.0 {
                violations.push(Violation::NonPositiveValue { element: id, kind: e.kind_name(), value });
            }
        };
        match e {
            Element::Resistor { a, b, ohms } => {
                check_positive(*ohms);
                union(&mut parent, a.0, b.0);
            }
            Element::Capacitor { a, b, farads } => {
                check_positive(*farads);
                union(&mut parent, a.0, b.0);
            }
            Element::VSource { pos, neg, dc, ac } | Element::ISource { pos, neg, dc, ac } => {
                if !dc.is_finite() || !ac.is_finite() {
                    violations.push(Violation::NonFiniteValue { element: id, kind: e.kind_name() });
                }
                if matches!(e, Element::VSource { .. }) {
                    union(&mut parent, pos.0, neg.0);
                }
            }
            Element::BreakPort { from, to, .. } => union(&mut parent, from.0, to.0),
            Element::Vccs { cp, cn, op, on, siemens } => {
                if !siemens.is_finite() {
                    violations.push(Violation::NonFiniteValue { element: id, kind: e.kind_name() });
                }
                if *siemens != 0.0 {
                    join_controlled(&mut parent, [*cp, *cn], [*op, *on]);
                }
            }
            Element::NonlinearVccs { cp, cn, op, on, model } => {
                if let Err(reason) = model.check() {
                    violations.push(Violation::InvalidModel { element: id, reason });
                }
                if !model.is_constant() {
                    join_controlled(&mut parent, [*cp, *cn], [*op, *on]);
                }
            }
        }
    }

    for node in 1..n {
        if find(&mut parent, node) != 0 {
            let label = circuit.node_label(NodeId(node)).map(str::to_string);
            violations.push(Violation::FloatingNode { node: NodeId(node), label });
        }
    }

    let mut seen: Vec<&str> = Vec::new();
    for (label, _) in &circuit.labels {
        if seen.contains(&label.as_str()) {
            if !violations.iter().any(|v| matches!(v, Violation::DuplicateLabel { label: l } if l == label)) {
                violations.push(Violation::DuplicateLabel { label: label.clone() });
            }
        } else {
            seen.push(label);
        }
    }

    ValidationReport { violations }
}

/// A controlled source only ties its output to the network when the output
/// shares a terminal with the control pair (a self-conductance); otherwise
/// it is an ideal current injection and provides no DC path.
fn join_controlled(parent: &mut [usize], ctrl: [NodeId; 2], out: [NodeId; 2]) {
    if out.iter().any(|o| ctrl.contains(o)) {
        for x in ctrl.iter().chain(out.iter()) {
            union(parent, ctrl[0].0, x.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_insertion_allocates_node() {
        let mut c = Circuit::new();
        let id = c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 1000.0 }).unwrap();
        assert_eq!(id, ElementId(0));
        assert!(c.node_count() >= 2);
    }

    #[test]
    fn out_of_range_terminal_is_rejected() {
        let mut c = Circuit::with_nodes(3);
        let err = c.add_element(Element::Capacitor { a: NodeId(5), b: GROUND, farads: 160e-12 }).unwrap_err();
        assert!(matches!(err, Error::UnknownNode { node: 5, .. }));
    }

    #[test]
    fn ids_follow_insertion_order() {
        let mut c = Circuit::with_nodes(2);
        let a = c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 1.0 }).unwrap();
        let b = c.add_element(Element::Capacitor { a: NodeId(1), b: GROUND, farads: 1.0 }).unwrap();
        assert_eq!((a, b), (ElementId(0), ElementId(1)));
    }

    fn rc_divider() -> Circuit {
        let mut c = Circuit::with_nodes(2);
        c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 1e3 }).unwrap();
        c.add_element(Element::Capacitor { a: NodeId(1), b: GROUND, farads: 1e-9 }).unwrap();
        c.add_element(Element::VSource { pos: NodeId(1), neg: GROUND, dc: 1.0, ac: 0.0 }).unwrap();
        c
    }

    #[test]
    fn well_formed_circuit_validates() {
        assert!(rc_divider().validate().is_ok());
    }

    #[test]
    fn isolated_node_is_reported() {
        let mut c = rc_divider();
        c.add_element(Element::Resistor { a: NodeId(2), b: NodeId(2), ohms: 1.0 }).unwrap();
        c.add_element(Element::ISource { pos: NodeId(3), neg: GROUND, dc: 1e-6, ac: 0.0 }).unwrap();
        let report = c.validate();
        assert!(report.violations.contains(&Violation::FloatingNode { node: NodeId(3), label: None }));
        assert!(report.violations.iter().any(|v| v.to_string().contains("node 3")));
    }

    #[test]
    fn zero_resistance_is_reported() {
        let mut c = rc_divider();
        c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: 0.0 }).unwrap();
        let report = c.validate();
        assert!(matches!(report.violations[0], Violation::NonPositiveValue { element: ElementId(3), .. }));
    }

    #[test]
    fn duplicate_labels_are_reported() {
        let mut c = rc_divider();
        c.set_label("out", NodeId(1)).unwrap();
        c.set_label("out", NodeId(1)).unwrap();
        assert_eq!(c.validate().violations, vec![Violation::DuplicateLabel { label: "out".into() }]);
    }

    #[test]
    fn validate_is_idempotent() {
        let mut c = rc_divider();
        c.add_element(Element::Resistor { a: NodeId(1), b: GROUND, ohms: -1.0 }).unwrap();
        assert_eq!(c.validate(), c.validate());
    }
}
