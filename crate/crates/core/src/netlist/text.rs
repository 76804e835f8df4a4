//! Line-oriented netlist text format.
//!
//! ```text
//! R <a> <b> <ohms>
//! C <a> <b> <farads>
//! G <cp> <cn> <op> <on> <siemens>
//! V <p> <n> <dc> <ac>
//! I <p> <n> <dc> <ac>
//! X <cp> <cn> <op> <on> <model> <key=value...> [sel=<node> thr=<v> hi.<key>=<v>...]
//! BREAK <from> <to> <label>
//! .label <name> <node>
//! ```

use std::fmt::Write as _;

use super::{Behavioral, Circuit, Element, ModeSelect, ModelKind, ModelParams, NodeId};
use crate::error::{Error, Result};
use crate::units::parse_si;

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn node(tok: &str, line: usize) -> Result<NodeId> {
    tok.parse::<usize>().map(NodeId).map_err(|_| perr(line, format!("`{tok}` is not a node index")))
}

fn value(tok: &str, line: usize) -> Result<f64> {
    parse_si(tok).map_err(|e| perr(line, e.to_string()))
}

fn expect_len(toks: &[&str], n: usize, line: usize) -> Result<()> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(perr(line, format!("`{}` expects {} fields, found {}", toks[0], n - 1, toks.len() - 1)))
    }
}

fn parse_model(toks: &[&str], line: usize) -> Result<Behavioral> {
    let kind: ModelKind = toks[0].parse().map_err(|e: String| perr(line, e))?;
    let mut lo = ModelParams::default();
    let mut hi: Option<ModelParams> = None;
    let mut sel: Option<NodeId> = None;
    let mut thr: Option<f64> = None;
    for kv in &toks[1..] {
        let (k, v) = kv.split_once('=').ok_or_else(|| perr(line, format!("expected key=value, found `{kv}`")))?;
        let k = k.to_ascii_lowercase();
        match k.as_str() {
            "sel" => sel = Some(node(v, line)?),
            "thr" => thr = Some(value(v, line)?),
            _ => {
                let (target, key) = match k.strip_prefix("hi.") {
                    Some(rest) => (hi.get_or_insert(ModelParams::default()), rest),
                    None => (&mut lo, k.as_str()),
                };
                if !kind.keys().contains(&key) {
                    return Err(perr(line, format!("model `{kind}` has no parameter `{key}`")));
                }
                target.set(key, value(v, line)?);
            }
        }
    }
    let select = match (sel, thr) {
        (Some(node), Some(threshold)) => Some(ModeSelect { node, threshold }),
        (None, None) => None,
        _ => return Err(perr(line, "`sel` and `thr` must be given together")),
    };
    if hi.is_some() != select.is_some() {
        return Err(perr(line, "`hi.*` parameters require `sel` and `thr`"));
    }
    Ok(Behavioral { kind, lo, hi, select })
}

pub fn parse_netlist(text: &str) -> Result<Circuit> {
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    let mut max_node = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let head = toks[0].to_ascii_uppercase();
        let element = match head.as_str() {
            "R" | "C" => {
                expect_len(&toks, 4, line)?;
                let (a, b, v) = (node(toks[1], line)?, node(toks[2], line)?, value(toks[3], line)?);
                if head == "R" {
                    Element::Resistor { a, b, ohms: v }
                } else {
                    Element::Capacitor { a, b, farads: v }
                }
            }
            "G" => {
                expect_len(&toks, 6, line)?;
                Element::Vccs {
                    cp: node(toks[1], line)?,
                    cn: node(toks[2], line)?,
                    op: node(toks[3], line)?,
                    on: node(toks[4], line)?,
                    siemens: value(toks[5], line)?,
                }
            }
            "V" | "I" => {
                expect_len(&toks, 5, line)?;
                let (pos, neg) = (node(toks[1], line)?, node(toks[2], line)?);
                let (dc, ac) = (value(toks[3], line)?, value(toks[4], line)?);
                if head == "V" {
                    Element::VSource { pos, neg, dc, ac }
                } else {
                    Element::ISource { pos, neg, dc, ac }
                }
            }
            "X" => {
                if toks.len() < 6 {
                    return Err(perr(line, "`X` expects four nodes and a model name"));
                }
                let model = parse_model(&toks[5..], line)?;
                if let Some(sel) = model.select {
                    max_node = max_node.max(sel.node.0);
                }
                Element::NonlinearVccs {
                    cp: node(toks[1], line)?,
                    cn: node(toks[2], line)?,
                    op: node(toks[3], line)?,
                    on: node(toks[4], line)?,
                    model,
                }
            }
            "BREAK" => {
                expect_len(&toks, 4, line)?;
                Element::BreakPort { from: node(toks[1], line)?, to: node(toks[2], line)?, label: toks[3].to_string() }
            }
            ".LABEL" => {
                expect_len(&toks, 3, line)?;
                let n = node(toks[2], line)?;
                max_node = max_node.max(n.0);
                labels.push((toks[1].to_string(), n));
                continue;
            }
            other => return Err(perr(line, format!("unknown element `{other}`"))),
        };
        max_node = max_node.max(element.nodes().iter().map(|n| n.0).max().unwrap_or(0));
        elements.push(element);
    }

    let mut circuit = Circuit::with_nodes(max_node + 1);
    for e in elements {
        circuit.add_element(e)?;
    }
    for (label, n) in labels {
        circuit.set_label(&label, n)?;
    }
    Ok(circuit)
}

/// Shortest text that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn write_model(out: &mut String, m: &Behavioral) {
    out.push_str(m.kind.name());
    for key in m.kind.keys() {
        let _ = write!(out, " {key}={}", num(m.lo.get(key).unwrap_or(0.0)));
    }
    if let (Some(hi), Some(sel)) = (&m.hi, m.select) {
        let _ = write!(out, " sel={} thr={}", sel.node.0, num(sel.threshold));
        for key in m.kind.keys() {
            let _ = write!(out, " hi.{key}={}", num(hi.get(key).unwrap_or(0.0)));
        }
    }
}

pub fn write_netlist(circuit: &Circuit) -> String {
    let mut out = String::new();
    for e in circuit.elements() {
        match e {
            Element::Resistor { a, b, ohms } => {
                let _ = writeln!(out, "R {a} {b} {}", num(*ohms));
            }
            Element::Capacitor { a, b, farads } => {
                let _ = writeln!(out, "C {a} {b} {}", num(*farads));
            }
            Element::Vccs { cp, cn, op, on, siemens } => {
                let _ = writeln!(out, "G {cp} {cn} {op} {on} {}", num(*siemens));
            }
            Element::VSource { pos, neg, dc, ac } => {
                let _ = writeln!(out, "V {pos} {neg} {} {}", num(*dc), num(*ac));
            }
            Element::ISource { pos, neg, dc, ac } => {
                let _ = writeln!(out, "I {pos} {neg} {} {}", num(*dc), num(*ac));
            }
            Element::NonlinearVccs { cp, cn, op, on, model } => {
                let _ = write!(out, "X {cp} {cn} {op} {on} ");
                write_model(&mut out, model);
                out.push('\n');
            }
            Element::BreakPort { from, to, label } => {
                let _ = writeln!(out, "BREAK {from} {to} {label}");
            }
        }
    }
    for (label, n) in circuit.labels() {
        let _ = writeln!(out, ".label {label} {n}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_element_kind() {
        let text = "\
# rc with extras
V 1 0 1.5 1
R 1 2 1k
C 2 0 1uF
G 2 0 3 0 -1m
I 3 0 0 0
R 3 0 10meg
X 2 0 0 3 tanh g=1m imax=5u sel=1 thr=0.75 hi.g=2m hi.imax=10u
BREAK 3 4 loop
.label out 2
";
        let c = parse_netlist(text).unwrap();
        assert_eq!(c.elements().len(), 8);
        assert_eq!(c.node_count(), 5);
        assert_eq!(c.node("out"), Some(NodeId(2)));
        assert!(matches!(c.elements()[2], Element::Capacitor { farads, .. } if (farads - 1e-6).abs() < 1e-18));
        match &c.elements()[6] {
            Element::NonlinearVccs { model, .. } => {
                assert_eq!(model.kind, ModelKind::Tanh);
                assert_eq!(model.hi.unwrap().imax, 10e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trips() {
        let text = "V 1 0 1.2 0\nR 1 2 1k\nC 2 0 160p\nX 2 0 1 2 square k=0.166 vth=0.4\n.label vout 2\n";
        let c = parse_netlist(text).unwrap();
        assert_eq!(parse_netlist(&write_netlist(&c)).unwrap(), c);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_netlist("R 1 0 1k\nQ 1 0\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 2, message: "unknown element `Q`".into() });
        assert!(parse_netlist("R 1 0\n").is_err());
        assert!(parse_netlist("X 1 0 0 1 lin k=1\n").is_err());
        assert!(parse_netlist("X 1 0 0 1 lin g=1 hi.g=2\n").is_err());
    }
}
