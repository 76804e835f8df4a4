use std::fmt;

use crate::error::{Error, Result};
use crate::kv::KvDocument;
use crate::units::format_sci;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Low,
    High,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Low, Mode::High];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Low => "low",
            Mode::High => "high",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Mode::Low => "Low",
            Mode::High => "High",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Mode::Low),
            "high" => Ok(Mode::High),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// High iff `ven > v_in / 2`. No hysteresis.
pub fn mode_from_ven(ven: f64, v_in: f64) -> Mode {
    if ven > 0.5 * v_in {
        Mode::High
    } else {
        Mode::Low
    }
}

macro_rules! param_structs {
    (
        shared { $($gfield:ident : $gkey:literal,)* }
        per_mode { $($mfield:ident : $mkey:literal,)* }
    ) => {
        /// Values that differ between the two bias modes.
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct ModeParams {
            $(pub $mfield: f64,)*
        }

        #[derive(Debug, Clone, PartialEq)]
        pub struct LdoParams {
            $(pub $gfield: f64,)*
            pub low: ModeParams,
            pub high: ModeParams,
        }

        impl LdoParams {
            fn zeroed() -> Self {
                Self { $($gfield: 0.0,)* low: ModeParams::default(), high: ModeParams::default() }
            }

            /// Every parameter as (file key, value), in file order.
            pub fn entries(&self) -> Vec<(String, f64)> {
                let mut out = vec![$(($gkey.to_string(), self.$gfield),)*];
                for mode in Mode::ALL {
                    let m = self.mode(mode);
                    $(out.push((format!("{}{}", $mkey, mode.suffix()), m.$mfield));)*
                }
                out
            }

            fn slot(&mut self, key: &str) -> Option<&mut f64> {
                match key {
                    $($gkey => return Some(&mut self.$gfield),)*
                    _ => {}
                }
                let (m, base) = if let Some(base) = key.strip_suffix("Low") {
                    (&mut self.low, base)
                } else if let Some(base) = key.strip_suffix("High") {
                    (&mut self.high, base)
                } else {
                    return None;
                };
                match base {
                    $($mkey => Some(&mut m.$mfield),)*
                    _ => None,
                }
            }
        }
    };
}

param_structs! {
    shared {
        v_in: "vInV",
        v_out_target: "vOutTargetV",
        v_ref: "vRefV",
        v_ctrl_bias: "vCtrlBiasV",
        c_comp: "cCompF",
        c_load: "cLoadF",
        c_ea: "cEaF",
        c_drain: "cDrainF",
        c_gate: "cGateF",
        pass_vth: "passVthV",
        sense_sat_ratio: "senseSatRatio",
        buffer_current_ratio: "bufferCurrentRatio",
        i_ref: "iRefA",
        iq_low: "iqLowA",
        iq_high_min: "iqHighMinA",
        iq_high_max: "iqHighMaxA",
        load_low_max: "loadLowMaxA",
        load_high_min: "loadHighMinA",
        load_high_max: "loadHighMaxA",
        iq_conventional: "iqConventionalA",
    }
    per_mode {
        gm_ea1: "gmEa1",
        ro_ea1: "roEa1",
        i_ea1_max: "iEa1Max",
        gm_ea2: "gmEa2",
        ro_ea2: "roEa2",
        i_ea2_max: "iEa2Max",
        gm_sense: "gmSense",
        gm_ctrl: "gmCtrl",
        ro_sense: "roSense",
        ro_buffer: "roBuffer",
        buffer_pull_up_max: "bufferPullUpMax",
        buffer_pull_down_max: "bufferPullDownMax",
        gm_pass: "gmPass",
        ro_pass: "roPass",
        i_bias_out: "iBiasOut",
    }
}

/// The shipped calibration, compiled in.
pub const DEFAULT_PARAMS: &str = include_str!("../../../../params/default.ldo");

impl Default for LdoParams {
    fn default() -> Self {
        Self::parse_complete(DEFAULT_PARAMS).expect("shipped parameter file is valid")
    }
}

impl LdoParams {
    pub fn mode(&self, mode: Mode) -> &ModeParams {
        match mode {
            Mode::Low => &self.low,
            Mode::High => &self.high,
        }
    }

    fn apply(&mut self, doc: &KvDocument) -> Result<Vec<String>> {
        let mut seen = Vec::new();
        for key in doc.keys("") {
            let value = doc.number("", key)?.expect("key exists");
            let slot = self.slot(key).ok_or_else(|| Error::Config(format!("unknown parameter `{key}`")))?;
            *slot = value;
            seen.push(key.to_string());
        }
        if let Some(section) = doc.sections().find(|s| !s.is_empty()) {
            return Err(Error::Config(format!("parameter files have no sections, found [{section}]")));
        }
        Ok(seen)
    }

    /// Parses a document that must define every parameter.
    pub fn parse_complete(text: &str) -> Result<Self> {
        let doc = KvDocument::parse(text)?;
        let mut p = Self::zeroed();
        let seen = p.apply(&doc)?;
        if let Some((missing, _)) = p.entries().into_iter().find(|(k, _)| !seen.contains(k)) {
            return Err(Error::Config(format!("missing parameter `{missing}`")));
        }
        p.check()?;
        Ok(p)
    }

    /// Parses a document whose entries override the shipped defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let doc = KvDocument::parse(text)?;
        let mut p = Self::default();
        p.apply(&doc)?;
        p.check()?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {}\n", format_sci(v, 17))).collect()
    }

    /// Pass-switch current at a given load: load plus output bias sink,
    /// minus what the pass resistance already carries at regulation.
    pub fn pass_current(&self, mode: Mode, load: f64) -> f64 {
        let m = self.mode(mode);
        load + m.i_bias_out - (self.v_in - self.v_out_target) / m.ro_pass
    }

    /// Load at which the mode's small-signal pass values are specified.
    pub fn reference_load(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Low => 0.0,
            Mode::High => self.load_high_max,
        }
    }

    /// Square-law strength `k` such that `gm = 2*sqrt(k*I)` at the
    /// reference load.
    pub fn pass_strength(&self, mode: Mode) -> f64 {
        let gm = self.mode(mode).gm_pass;
        gm * gm / (4.0 * self.pass_current(mode, self.reference_load(mode)))
    }

    /// Source-gate overdrive of the pass switch at a given load.
    pub fn pass_overdrive(&self, mode: Mode, load: f64) -> f64 {
        (self.pass_current(mode, load).max(0.0) / self.pass_strength(mode)).sqrt()
    }

    /// Bias current drawn from V_D, sized so the sense path is balanced at
    /// zero load (no static current through the injection stages).
    pub fn drain_bias(&self, mode: Mode) -> f64 {
        (self.pass_vth + self.pass_overdrive(mode, 0.0)) / self.mode(mode).ro_sense
    }

    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid parameters: {what}")));
        let positive = [
            ("vInV", self.v_in),
            ("vOutTargetV", self.v_out_target),
            ("vRefV", self.v_ref),
            ("cCompF", self.c_comp),
            ("cLoadF", self.c_load),
            ("cEaF", self.c_ea),
            ("cDrainF", self.c_drain),
            ("cGateF", self.c_gate),
            ("passVthV", self.pass_vth),
            ("senseSatRatio", self.sense_sat_ratio),
            ("iRefA", self.i_ref),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{k} must be > 0"));
            }
        }
        if self.v_out_target >= self.v_in {
            return bad("vOutTargetV must be below vInV");
        }
        if !(0.0 < self.iq_low && self.iq_low < self.iq_high_min && self.iq_high_min <= self.iq_high_max) {
            return bad("need 0 < iqLowA < iqHighMinA <= iqHighMaxA");
        }
        if !(0.0 < self.load_low_max && self.load_low_max < self.load_high_min && self.load_high_min < self.load_high_max) {
            return bad("need 0 < loadLowMaxA < loadHighMinA < loadHighMaxA");
        }
        if self.buffer_current_ratio < 1.0 {
            return bad("bufferCurrentRatio must be >= 1");
        }
        if !(self.iq_conventional > 0.0) {
            return bad("iqConventionalA must be > 0");
        }
        for mode in Mode::ALL {
            let m = self.mode(mode);
            let fields = [
                ("gmEa1", m.gm_ea1),
                ("roEa1", m.ro_ea1),
                ("iEa1Max", m.i_ea1_max),
                ("gmEa2", m.gm_ea2),
                ("roEa2", m.ro_ea2),
                ("iEa2Max", m.i_ea2_max),
                ("gmSense", m.gm_sense),
                ("gmCtrl", m.gm_ctrl),
                ("roSense", m.ro_sense),
                ("roBuffer", m.ro_buffer),
                ("bufferPullUpMax", m.buffer_pull_up_max),
                ("bufferPullDownMax", m.buffer_pull_down_max),
                ("gmPass", m.gm_pass),
                ("roPass", m.ro_pass),
            ];
            for (k, v) in fields {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(&format!("{k}{} must be > 0", mode.suffix()));
                }
            }
            if !(m.i_bias_out >= 0.0) {
                return bad(&format!("iBiasOut{} must be >= 0", mode.suffix()));
            }
            if m.buffer_pull_up_max < m.buffer_pull_down_max {
                return bad("buffer pull-up limit must not be below the pull-down limit");
            }
            if !(self.pass_current(mode, 0.0) > 0.0) {
                return bad(&format!("iBiasOut{} must exceed the pass resistance current", mode.suffix()));
            }
        }
        Ok(())
    }
}
