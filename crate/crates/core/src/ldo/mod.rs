//! The dual-range FVF regulator as a behavioural circuit.
//!
//! Five blocks: a two-stage error amplifier (V_EA, V_CTRL), the FVF sense
//! path (V_D), the gate buffer (V_G) and the pass switch (V_OUT). Every
//! block switches its strength with V_EN.

mod build;
mod params;

pub use build::{
    build_small_signal, build_small_signal_with, build_transient, linearized_blocks, pole_estimates, LdoCircuit,
    LdoNodes, LdoStimuli, SmallSignalOptions, BLOCKS,
};
pub use params::{mode_from_ven, LdoParams, Mode, ModeParams, DEFAULT_PARAMS};

use crate::error::{Error, Result};
use crate::transient::Pwl;

/// Quiescent current drawn by the regulator at a given load.
///
/// Low mode is flat; High mode interpolates linearly between the ends of
/// the high load range and clamps outside it.
pub fn quiescent_current(params: &LdoParams, mode: Mode, load: f64) -> Result<f64> {
    if !(load >= 0.0) || !load.is_finite() {
        return Err(Error::InvalidArgument(format!("load current must be >= 0, got {load}")));
    }
    match mode {
        Mode::Low => {
            if load > params.load_low_max {
                Err(Error::LoadOutOfRange { mode: "low", load, min: 0.0, max: params.load_low_max })
            } else {
                Ok(params.iq_low)
            }
        }
        Mode::High => {
            let span = params.load_high_max - params.load_high_min;
            let frac = ((load - params.load_high_min) / span).clamp(0.0, 1.0);
            let iq = params.iq_high_min + (params.iq_high_max - params.iq_high_min) * frac;
            Ok(iq.clamp(params.iq_high_min, params.iq_high_max))
        }
    }
}

/// Bias quantities the controller applies in a mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBias {
    pub mode: Mode,
    /// Reference current; identical in both modes.
    pub i_ref: f64,
    pub ea1_limit: f64,
    pub ea2_limit: f64,
    pub drain_bias: f64,
    pub sense_limit: f64,
    pub buffer_pull_up: f64,
    pub buffer_pull_down: f64,
    pub output_bias: f64,
    pub pass_strength: f64,
}

pub fn bias_for_mode(params: &LdoParams, mode: Mode) -> ModeBias {
    let m = params.mode(mode);
    let drain_bias = params.drain_bias(mode);
    ModeBias {
        mode,
        i_ref: params.i_ref,
        ea1_limit: m.i_ea1_max,
        ea2_limit: m.i_ea2_max,
        drain_bias,
        sense_limit: params.sense_sat_ratio * drain_bias,
        buffer_pull_up: m.buffer_pull_up_max,
        buffer_pull_down: m.buffer_pull_down_max,
        output_bias: m.i_bias_out,
        pass_strength: params.pass_strength(mode),
    }
}

/// Timing of the load-step experiment: V_EN rises just before the load
/// ramps up, the load ramps back down later, then V_EN falls.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadStepScenario {
    pub t_up: f64,
    pub edge: f64,
    pub t_down: f64,
    pub t_en_off: f64,
    pub en_edge: f64,
    pub t_end: f64,
    pub load: f64,
}

impl Default for LoadStepScenario {
    fn default() -> Self {
        Self { t_up: 1e-6, edge: 80e-9, t_down: 3e-6, t_en_off: 4e-6, en_edge: 1e-9, t_end: 5.5e-6, load: 15e-3 }
    }
}

impl LoadStepScenario {
    pub fn stimuli(&self, params: &LdoParams) -> Result<LdoStimuli> {
        let s = self;
        if !(s.en_edge > 0.0 && s.edge > 0.0 && s.en_edge <= s.t_up) {
            return Err(Error::Config("load-step edges must be > 0 and V_EN must rise after t = 0".into()));
        }
        if !(s.t_up + s.edge < s.t_down && s.t_down + s.edge <= s.t_en_off && s.t_en_off + s.en_edge < s.t_end) {
            return Err(Error::Config("load-step times must be ordered t_up < t_down < t_en_off < t_end".into()));
        }
        let load = Pwl::new(vec![(0.0, 0.0), (s.t_up, 0.0), (s.t_up + s.edge, s.load), (s.t_down, s.load), (s.t_down + s.edge, 0.0)])?;
        let ven = Pwl::new(vec![
            (0.0, 0.0),
            (s.t_up - s.en_edge, 0.0),
            (s.t_up, params.v_in),
            (s.t_en_off, params.v_in),
            (s.t_en_off + s.en_edge, 0.0),
        ])?;
        Ok(LdoStimuli { load: Some(load), ven: Some(ven) })
    }
}
