//! Behavioural transconductance models for `NonlinearVccs`.
//!
//! Every model is C1 in its control voltage so Newton iteration sees a
//! continuous Jacobian. A model may carry a second parameter set selected by
//! a node voltage (the digital mode switch); the selection itself is a step
//! and is only meant for nodes driven by sources.

use std::fmt;
use std::str::FromStr;

use super::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// `i = g*vc + i0`
    Lin,
    /// `i = imax*tanh(g*(vc - voff)/imax) + i0`
    Tanh,
    /// `i = k*(vc - vth)^2` above threshold, zero below
    Square,
    /// Asymmetric saturating transconductor: `ipos*tanh(g*vc/ipos)` for
    /// positive drive, `ineg*tanh(g*vc/ineg)` for negative drive.
    Slew,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lin => "lin",
            ModelKind::Tanh => "tanh",
            ModelKind::Square => "square",
            ModelKind::Slew => "slew",
        }
    }

    /// Parameter keys meaningful for this kind, in canonical output order.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            ModelKind::Lin => &["g", "i0"],
            ModelKind::Tanh => &["g", "imax", "voff", "i0"],
            ModelKind::Square => &["k", "vth"],
            ModelKind::Slew => &["g", "ipos", "ineg"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lin" => Ok(ModelKind::Lin),
            "tanh" => Ok(ModelKind::Tanh),
            "square" => Ok(ModelKind::Square),
            "slew" => Ok(ModelKind::Slew),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelParams {
    pub g: f64,
    pub i0: f64,
    pub imax: f64,
    pub voff: f64,
    pub k: f64,
    pub vth: f64,
    pub ipos: f64,
    pub ineg: f64,
}

impl ModelParams {
    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "g" => self.g,
            "i0" => self.i0,
            "imax" => self.imax,
            "voff" => self.voff,
            "k" => self.k,
            "vth" => self.vth,
            "ipos" => self.ipos,
            "ineg" => self.ineg,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "g" => &mut self.g,
            "i0" => &mut self.i0,
            "imax" => &mut self.imax,
            "voff" => &mut self.voff,
            "k" => &mut self.k,
            "vth" => &mut self.vth,
            "ipos" => &mut self.ipos,
            "ineg" => &mut self.ineg,
            _ => return false,
        };
        *slot = value;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSelect {
    pub node: NodeId,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Behavioral {
    pub kind: ModelKind,
    pub lo: ModelParams,
    pub hi: Option<ModelParams>,
    pub select: Option<ModeSelect>,
}

impl Behavioral {
    pub fn new(kind: ModelKind, lo: ModelParams) -> Self {
        Self { kind, lo, hi: None, select: None }
    }

    pub fn lin(g: f64, i0: f64) -> Self {
        Self::new(ModelKind::Lin, ModelParams { g, i0, ..Default::default() })
    }

    pub fn tanh(g: f64, imax: f64) -> Self {
        Self::new(ModelKind::Tanh, ModelParams { g, imax, ..Default::default() })
    }

    pub fn square(k: f64, vth: f64) -> Self {
        Self::new(ModelKind::Square, ModelParams { k, vth, ..Default::default() })
    }

    pub fn slew(g: f64, ipos: f64, ineg: f64) -> Self {
        Self::new(ModelKind::Slew, ModelParams { g, ipos, ineg, ..Default::default() })
    }

    /// Adds a second parameter set used while `V(node) > threshold`.
    pub fn switched(mut self, node: NodeId, threshold: f64, hi: ModelParams) -> Self {
        self.hi = Some(hi);
        self.select = Some(ModeSelect { node, threshold });
        self
    }

    /// Parameter set active for the given node-voltage lookup.
    pub fn active(&self, voltage: impl Fn(NodeId) -> f64) -> &ModelParams {
        match (&self.hi, self.select) {
            (Some(hi), Some(sel)) if voltage(sel.node) > sel.threshold => hi,
            _ => &self.lo,
        }
    }

    /// Current and its derivative with respect to the control voltage.
    pub fn eval(&self, p: &ModelParams, vc: f64) -> (f64, f64) {
        match self.kind {
            ModelKind::Lin => (p.g * vc + p.i0, p.g),
            ModelKind::Tanh => {
                let t = (p.g * (vc - p.voff) / p.imax).tanh();
                (p.imax * t + p.i0, p.g * (1.0 - t * t))
            }
            ModelKind::Square => {
                let d = vc - p.vth;
                if d > 0.0 {
                    (p.k * d * d, 2.0 * p.k * d)
                } else {
                    (0.0, 0.0)
                }
            }
            ModelKind::Slew => {
                let x = p.g * vc;
                let lim = if x >= 0.0 { p.ipos } else { p.ineg };
                let t = (x / lim).tanh();
                (lim * t, p.g * (1.0 - t * t))
            }
        }
    }

    /// Checks the parameter sets for values that would break the model.
    pub fn check(&self) -> Result<(), String> {
        for p in std::iter::once(&self.lo).chain(self.hi.as_ref()) {
            for key in self.kind.keys() {
                let v = p.get(key).unwrap_or(0.0);
                if !v.is_finite() {
                    return Err(format!("{} parameter {key} is not finite", self.kind));
                }
            }
            let positive: &[(&str, f64)] = match self.kind {
                ModelKind::Tanh => &[("imax", p.imax)],
                ModelKind::Slew => &[("ipos", p.ipos), ("ineg", p.ineg)],
                ModelKind::Square => &[],
                ModelKind::Lin => &[],
            };
            for (key, v) in positive {
                if *v <= 0.0 {
                    return Err(format!("{} parameter {key} must be > 0", self.kind));
                }
            }
            if self.kind == ModelKind::Square && p.k < 0.0 {
                return Err("square parameter k must be >= 0".into());
            }
        }
        if self.hi.is_some() != self.select.is_some() {
            return Err("mode-switched parameters need both `sel` and `hi.*`".into());
        }
        Ok(())
    }

    /// True when every parameter set has zero small-signal slope everywhere
    /// (pure bias current sinks).
    pub fn is_constant(&self) -> bool {
        self.kind == ModelKind::Lin && self.lo.g == 0.0 && self.hi.map_or(true, |h| h.g == 0.0)
    }
}
