//! Waveform measurements and regulator figures of merit.

use std::fmt::Write as _;

use crate::ac::{db, FrequencyResponse};
use crate::error::{Error, Result};
use crate::transient::TransientTrace;
use crate::units::format_sci;

fn series<'a>(trace: &'a TransientTrace, label: &str) -> Result<&'a [f64]> {
    trace.voltage(label).ok_or_else(|| Error::InvalidArgument(format!("trace has no node labelled `{label}`")))
}

/// `(undershoot, overshoot)` of a labelled node relative to `target`, both
/// clamped at zero.
pub fn excursions(trace: &TransientTrace, label: &str, target: f64) -> Result<(f64, f64)> {
    let v = series(trace, label)?;
    if v.is_empty() {
        return Err(Error::InvalidArgument("trace is empty".into()));
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(((target - lo).max(0.0), (hi - target).max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    Settled(f64),
    NotSettled,
}

impl Settling {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Settling::Settled(s) => Some(s),
            Settling::NotSettled => None,
        }
    }
}

/// Time after `from` at which the node enters the band
/// `|v - target| <= band_frac * target` for good. The entry instant is
/// interpolated between the last out-of-band sample and its successor.
pub fn settling_time(trace: &TransientTrace, label: &str, target: f64, band_frac: f64, from: f64) -> Result<Settling> {
    if !(band_frac > 0.0 && band_frac <= 0.1) {
        return Err(Error::InvalidArgument(format!("settling band must be in (0, 0.1], got {band_frac}")));
    }
    let v = series(trace, label)?;
    let t = &trace.times;
    if t.is_empty() || from < t[0] || from > t[t.len() - 1] {
        return Err(Error::InvalidArgument(format!("start time {from} is outside the trace")));
    }
    let band = band_frac * target.abs();
    let start = t.partition_point(|x| *x < from);
    let outside = |k: usize| (v[k] - target).abs() > band;
    let Some(last_bad) = (start..t.len()).rev().find(|&k| outside(k)) else {
        return Ok(Settling::Settled(0.0));
    };
    if last_bad + 1 >= t.len() {
        return Ok(Settling::NotSettled);
    }
    let (t0, t1, v0, v1) = (t[last_bad], t[last_bad + 1], v[last_bad], v[last_bad + 1]);
    let edge = if v0 > target { target + band } else { target - band };
    let frac = if v1 == v0 { 1.0 } else { ((edge - v0) / (v1 - v0)).clamp(0.0, 1.0) };
    Ok(Settling::Settled((t0 + frac * (t1 - t0) - from).max(0.0)))
}

/// `TR = C_load * dV / I_load,max`.
pub fn response_time(c_load: f64, delta_v: f64, i_load_max: f64) -> Result<f64> {
    if !(c_load > 0.0 && i_load_max > 0.0 && delta_v >= 0.0) {
        return Err(Error::InvalidArgument("response time needs C > 0, I > 0 and dV >= 0".into()));
    }
    Ok(c_load * delta_v / i_load_max)
}

/// `FOM = TR * I_Q / I_load,max`.
pub fn fom(response_time: f64, iq: f64, i_load_max: f64) -> Result<f64> {
    if !(response_time > 0.0 && i_load_max > 0.0 && iq >= 0.0) {
        return Err(Error::InvalidArgument("figure of merit needs TR > 0, I_load > 0 and I_Q >= 0".into()));
    }
    Ok(response_time * iq / i_load_max)
}

pub fn current_efficiency(i_load: f64, iq: f64) -> Result<f64> {
    if !(iq > 0.0 && i_load >= 0.0) {
        return Err(Error::InvalidArgument("current efficiency needs I_Q > 0 and I_load >= 0".into()));
    }
    Ok(i_load / (i_load + iq))
}

pub fn iq_reduction(iq_conventional: f64, iq_dual: f64) -> Result<f64> {
    if !(iq_conventional > 0.0 && iq_dual > 0.0) {
        return Err(Error::InvalidArgument("quiescent currents must be > 0".into()));
    }
    Ok(decimal_round(iq_conventional / iq_dual, 12))
}

/// Rounds to `sig` significant decimal digits. Currents arrive as decimal
/// text (`42u`, `3u`); their binary images make a plain quotient land one
/// ulp off the decimal ratio, which this removes.
fn decimal_round(x: f64, sig: usize) -> f64 {
    format!("{:.*e}", sig - 1, x).parse().unwrap_or(x)
}

const BAND_SLACK: f64 = 1e-9;

fn worst_in_band(response: &FrequencyResponse, (lo, hi): (f64, f64)) -> Result<f64> {
    let f = &response.freqs_hz;
    if f.is_empty() || !(lo <= hi) {
        return Err(Error::InvalidArgument("empty response or inverted band".into()));
    }
    if lo < f[0] * (1.0 - BAND_SLACK) || hi > f[f.len() - 1] * (1.0 + BAND_SLACK) {
        return Err(Error::InvalidArgument(format!(
            "band {lo:e}..{hi:e} Hz is outside the sweep {:e}..{:e} Hz",
            f[0],
            f[f.len() - 1]
        )));
    }
    Ok(f.iter()
        .zip(&response.values)
        .filter(|(fr, _)| **fr >= lo * (1.0 - BAND_SLACK) && **fr <= hi * (1.0 + BAND_SLACK))
        .map(|(_, v)| db(v.norm()))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Worst (largest) dB over each band.
pub fn psr_margins(response: &FrequencyResponse, band_low: (f64, f64), band_wide: (f64, f64)) -> Result<(f64, f64)> {
    Ok((worst_in_band(response, band_low)?, worst_in_band(response, band_wide)?))
}

pub const PSR_BAND_LOW: (f64, f64) = (1e3, 1e4);
pub const PSR_BAND_WIDE: (f64, f64) = (1e3, 1e7);

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub undershoot_v: f64,
    pub overshoot_v: f64,
    pub settling_time_s: Option<f64>,
    pub response_time_s: f64,
    pub fom_s: f64,
    pub current_efficiency: f64,
    pub psr_worst_db_low: f64,
    pub psr_worst_db_wide: f64,
    pub iq_reduction_factor: f64,
    /// (description, amps)
    pub iq_table: Vec<(String, f64)>,
}

fn sig6(v: f64) -> String {
    format_sci(v, 6)
}

impl MetricsReport {
    fn rows(&self) -> Vec<(String, String, &'static str)> {
        let mut rows = vec![
            ("undershoot".to_string(), sig6(self.undershoot_v), "V"),
            ("overshoot".to_string(), sig6(self.overshoot_v), "V"),
            (
                "settling_time".to_string(),
                self.settling_time_s.map_or_else(|| "not_settled".to_string(), sig6),
                "s",
            ),
            ("response_time".to_string(), sig6(self.response_time_s), "s"),
            ("fom".to_string(), sig6(self.fom_s), "s"),
            ("current_efficiency".to_string(), sig6(self.current_efficiency), "1"),
            ("psr_worst_db_low".to_string(), sig6(self.psr_worst_db_low), "dB"),
            ("psr_worst_db_wide".to_string(), sig6(self.psr_worst_db_wide), "dB"),
            ("iq_reduction_factor".to_string(), sig6(self.iq_reduction_factor), "1"),
        ];
        for (name, iq) in &self.iq_table {
            rows.push((format!("iq_{name}"), sig6(*iq), "A"));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,unit\n");
        for (m, v, u) in self.rows() {
            let _ = writeln!(s, "{m},{v},{u}");
        }
        s
    }

    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(6).max(6);
        let vw = rows.iter().map(|r| r.1.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<w$}  {:>vw$}  unit\n", "metric", "value");
        for (m, v, u) in rows {
            let _ = writeln!(s, "{m:<w$}  {v:>vw$}  {u}");
        }
        s
    }
}
