//! Batch scenarios behind the command-line front end: loop gain at every
//! break port, PSR sweeps, the load-step transient, the metrics table and
//! the comparison against the published figures.
//!
//! Every function here is pure: artifacts come back as `(name, contents)`
//! pairs in a fixed order and the caller decides where they go.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::ac::{self, FrequencyResponse, FrequencySweep, LoopGainResult};
use crate::dc::{dc_operating_point_with, DcOptions};
use crate::error::{Error, Result};
use crate::kv::KvDocument;
use crate::ldo::{
    build_small_signal, build_small_signal_with, build_transient, quiescent_current, LdoParams, LdoStimuli,
    LoadStepScenario, Mode, SmallSignalOptions,
};
use crate::metrics::{self, MetricsReport, Settling, PSR_BAND_LOW, PSR_BAND_WIDE};
use crate::netlist::{Circuit, Element, ElementId, NodeId};
use crate::transient::{simulate_with, Pwl, TransientOptions, TransientTrace};
use crate::units::{format_sci, parse_si, sci9};

pub const LOOP_PORTS: [&str; 3] = ["overall", "loop1", "loop2"];

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: String) -> Self {
        Self { name: name.into(), contents }
    }
}

/// One row of the comparison against published figures.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub unit: &'static str,
    /// Human-readable acceptance rule, e.g. `[3e6, 6e6]` or `> 45`.
    pub rule: String,
    pub published: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientSettings {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_step: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub loop_sweep: FrequencySweep,
    pub psr_sweep: FrequencySweep,
    pub loop_points: Vec<(Mode, f64)>,
    pub psr_points: Vec<(Mode, f64)>,
    pub transient: TransientSettings,
    pub scenario: LoadStepScenario,
    /// `None` means the stimulus section left the waveform out.
    pub load_wave: Option<WaveSpec>,
    pub ven_wave: Option<WaveSpec>,
    pub settling_band: f64,
    /// Generic netlist analysis: input source and output node.
    pub ac_input: Option<ElementId>,
    pub ac_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WaveSpec {
    /// Derived from the load-step scenario timing.
    Step,
    Pwl(Pwl),
}

fn default_points() -> Vec<(Mode, f64)> {
    vec![(Mode::Low, 0.0), (Mode::Low, 500e-6), (Mode::High, 5e-3), (Mode::High, 15e-3)]
}

impl Default for ReportConfig {
    fn default() -> Self {
        let scenario = LoadStepScenario::default();
        Self {
            loop_sweep: FrequencySweep { start_hz: 1.0, stop_hz: 10e9, points_per_decade: 40 },
            psr_sweep: FrequencySweep { start_hz: 1e3, stop_hz: 10e6, points_per_decade: 40 },
            loop_points: default_points(),
            psr_points: default_points(),
            transient: TransientSettings { tol_rel: 1e-4, tol_abs: 1e-6, max_step: 1e-9, t_end: scenario.t_end },
            scenario,
            load_wave: Some(WaveSpec::Step),
            ven_wave: Some(WaveSpec::Step),
            settling_band: 0.01,
            ac_input: None,
            ac_output: None,
        }
    }
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("sweep", &["start", "stop", "ppd"]),
    ("psr", &["start", "stop", "ppd", "points"]),
    ("loopgain", &["points"]),
    ("transient", &["t_end", "tol_rel", "tol_abs", "max_step"]),
    ("stimulus", &["load", "ven", "t_up", "edge", "t_down", "t_en_off", "en_edge", "load_max"]),
    ("settling", &["band"]),
];

fn parse_points(text: &str) -> Result<Vec<(Mode, f64)>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (m, l) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("operating point `{item}` must be `mode:load`")))?;
        let mode: Mode = m.trim().parse()?;
        let load = parse_si(l).map_err(|e| Error::Config(e.to_string()))?;
        out.push((mode, load));
    }
    if out.is_empty() {
        return Err(Error::Config("empty operating-point list".into()));
    }
    Ok(out)
}

fn parse_wave(text: &str) -> Result<WaveSpec> {
    if text.trim().eq_ignore_ascii_case("step") {
        return Ok(WaveSpec::Step);
    }
    let mut pts = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (t, v) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("waveform point `{item}` must be `time:value`")))?;
        let t = parse_si(t).map_err(|e| Error::Config(e.to_string()))?;
        let v = parse_si(v).map_err(|e| Error::Config(e.to_string()))?;
        pts.push((t, v));
    }
    Pwl::new(pts).map(WaveSpec::Pwl).map_err(|e| Error::Config(format!("waveform: {e}")))
}

impl ReportConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvDocument::parse(text)?)
    }

    pub fn from_kv(doc: &KvDocument) -> Result<Self> {
        let mut cfg = Self::default();
        for section in doc.sections() {
            let known = match section {
                "" => &[][..],
                "ac" => &["input", "output"][..],
                s => match SECTIONS.iter().find(|(n, _)| *n == s) {
                    Some((_, keys)) => *keys,
                    None => return Err(Error::Config(format!("unknown config section [{s}]"))),
                },
            };
            if let Some(k) = doc.keys(section).find(|k| !known.contains(k)) {
                return Err(Error::Config(format!("unknown key `{k}` in [{section}]")));
            }
        }
        let num = |s: &str, k: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = doc.number(s, k)? {
                *slot = v;
            }
            Ok(())
        };
        let sweep = |s: &str, sw: &mut FrequencySweep| -> Result<()> {
            num(s, "start", &mut sw.start_hz)?;
            num(s, "stop", &mut sw.stop_hz)?;
            let mut ppd = sw.points_per_decade as f64;
            num(s, "ppd", &mut ppd)?;
            if !(ppd >= 1.0 && ppd.fract() == 0.0) {
                return Err(Error::Config(format!("[{s}] ppd must be a positive integer")));
            }
            sw.points_per_decade = ppd as usize;
            FrequencySweep::new(sw.start_hz, sw.stop_hz, sw.points_per_decade)
                .map(|_| ())
                .map_err(|e| Error::Config(format!("[{s}] {e}")))
        };
        sweep("sweep", &mut cfg.loop_sweep)?;
        sweep("psr", &mut cfg.psr_sweep)?;
        if let Some(p) = doc.get("loopgain", "points") {
            cfg.loop_points = parse_points(p)?;
        }
        if let Some(p) = doc.get("psr", "points") {
            cfg.psr_points = parse_points(p)?;
        }

        let t = &mut cfg.transient;
        num("transient", "tol_rel", &mut t.tol_rel)?;
        num("transient", "tol_abs", &mut t.tol_abs)?;
        num("transient", "max_step", &mut t.max_step)?;
        let sc = &mut cfg.scenario;
        num("stimulus", "t_up", &mut sc.t_up)?;
        num("stimulus", "edge", &mut sc.edge)?;
        num("stimulus", "t_down", &mut sc.t_down)?;
        num("stimulus", "t_en_off", &mut sc.t_en_off)?;
        num("stimulus", "en_edge", &mut sc.en_edge)?;
        num("stimulus", "load_max", &mut sc.load)?;
        num("transient", "t_end", &mut sc.t_end)?;
        cfg.transient.t_end = cfg.scenario.t_end;
        if !(t_positive(&cfg.transient)) {
            return Err(Error::Config("[transient] values must be > 0".into()));
        }

        // An explicit [stimulus] section must name both waveforms.
        if doc.has_section("stimulus") {
            cfg.load_wave = doc.get("stimulus", "load").map(parse_wave).transpose()?;
            cfg.ven_wave = doc.get("stimulus", "ven").map(parse_wave).transpose()?;
        }
        num("settling", "band", &mut cfg.settling_band)?;
        if !(cfg.settling_band > 0.0 && cfg.settling_band <= 0.1) {
            return Err(Error::Config("[settling] band must be in (0, 0.1]".into()));
        }
        if let Some(v) = doc.number("ac", "input")? {
            if !(v >= 0.0 && v.fract() == 0.0) {
                return Err(Error::Config("[ac] input must be an element index".into()));
            }
            cfg.ac_input = Some(ElementId(v as usize));
        }
        cfg.ac_output = doc.get("ac", "output").map(str::to_string);
        Ok(cfg)
    }

    /// Load and V_EN waveforms for the transient run.
    pub fn stimuli(&self, params: &LdoParams) -> Result<LdoStimuli> {
        let needs_step = matches!(self.load_wave, Some(WaveSpec::Step)) || matches!(self.ven_wave, Some(WaveSpec::Step));
        let step = if needs_step { Some(self.scenario.stimuli(params)?) } else { None };
        let pick = |w: &Option<WaveSpec>, f: fn(&LdoStimuli) -> Option<Pwl>| match w {
            None => None,
            Some(WaveSpec::Pwl(p)) => Some(p.clone()),
            Some(WaveSpec::Step) => step.as_ref().and_then(f),
        };
        Ok(LdoStimuli { load: pick(&self.load_wave, |s| s.load.clone()), ven: pick(&self.ven_wave, |s| s.ven.clone()) })
    }
}

fn t_positive(t: &TransientSettings) -> bool {
    [t.tol_rel, t.tol_abs, t.max_step, t.t_end].iter().all(|v| *v > 0.0 && v.is_finite())
}

/// Compact current label for file names: `0A`, `500uA`, `15mA`.
pub fn load_tag(load: f64) -> String {
    if load == 0.0 {
        return "0A".into();
    }
    let (scale, unit) = if load.abs() >= 1.0 {
        (1.0, "A")
    } else if load.abs() >= 1e-3 {
        (1e3, "mA")
    } else if load.abs() >= 1e-6 {
        (1e6, "uA")
    } else {
        (1e9, "nA")
    };
    let v = format!("{:.3}", load * scale);
    let v = v.trim_end_matches('0').trim_end_matches('.');
    format!("{}{unit}", v.replace('.', "p"))
}

// ---------------------------------------------------------------- loop gain

#[derive(Debug, Clone, PartialEq)]
pub struct LoopGainRun {
    pub mode: Mode,
    pub load: f64,
    pub port: &'static str,
    pub buffer: bool,
    pub result: LoopGainResult,
}

fn loop_gains(params: &LdoParams, mode: Mode, load: f64, sweep: &FrequencySweep, opts: SmallSignalOptions) -> Result<Vec<LoopGainRun>> {
    let ldo = build_small_signal_with(params, mode, load, opts)?;
    let op = dc_operating_point_with(&ldo.circuit, &DcOptions::default())?;
    let ports: &[&'static str] = if opts.buffer { &LOOP_PORTS } else { &LOOP_PORTS[..1] };
    ports
        .iter()
        .map(|port| {
            let result = ac::loop_gain_at(&ldo.circuit, &op, port, sweep, 1.0)?;
            Ok(LoopGainRun { mode, load, port, buffer: opts.buffer, result })
        })
        .collect()
}

/// All three break ports at every configured operating point, plus the
/// overall loop with the gate buffer removed at the heaviest High load.
pub fn run_loopgain(params: &LdoParams, cfg: &ReportConfig) -> Result<Vec<LoopGainRun>> {
    let mut jobs: Vec<(Mode, f64, SmallSignalOptions)> =
        cfg.loop_points.iter().map(|&(m, l)| (m, l, SmallSignalOptions::default())).collect();
    if let Some(&(m, l)) = cfg.loop_points.iter().filter(|(m, _)| *m == Mode::High).last() {
        jobs.push((m, l, SmallSignalOptions { buffer: false }));
    }
    let runs: Vec<Vec<LoopGainRun>> = jobs
        .par_iter()
        .map(|&(m, l, o)| loop_gains(params, m, l, &cfg.loop_sweep, o))
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().flatten().collect())
}

fn opt_sci(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), sci9)
}

pub fn loopgain_artifacts(runs: &[LoopGainRun]) -> Vec<Artifact> {
    let mut out = Vec::new();
    let mut summary = String::from("mode,load_a,port,buffer,dc_gain_db,ugbw_hz,phase_margin_deg\n");
    for r in runs {
        let suffix = if r.buffer { "" } else { "_nobuffer" };
        out.push(Artifact::new(
            format!("loopgain_{}_{}_{}{suffix}.csv", r.port, r.mode, load_tag(r.load)),
            r.result.response.to_csv(),
        ));
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            r.mode,
            sci9(r.load),
            r.port,
            r.buffer,
            sci9(r.result.dc_gain_db),
            opt_sci(r.result.ugbw_hz),
            opt_sci(r.result.phase_margin_deg)
        );
    }
    out.push(Artifact::new("loopgain_summary.csv", summary));
    out
}

// ---------------------------------------------------------------- PSR

#[derive(Debug, Clone, PartialEq)]
pub struct PsrRun {
    pub mode: Mode,
    pub load: f64,
    pub response: FrequencyResponse,
    /// Worst dB in the 1-10 kHz and 1 kHz-10 MHz bands.
    pub worst_low_db: f64,
    pub worst_wide_db: f64,
}

pub fn run_psr(params: &LdoParams, cfg: &ReportConfig) -> Result<Vec<PsrRun>> {
    cfg.psr_points
        .par_iter()
        .map(|&(mode, load)| {
            let ldo = build_small_signal(params, mode, load)?;
            let response = ac::psr(&ldo.circuit, &cfg.psr_sweep, ldo.supply, ldo.nodes.out)?;
            let (worst_low_db, worst_wide_db) = metrics::psr_margins(&response, PSR_BAND_LOW, PSR_BAND_WIDE)?;
            Ok(PsrRun { mode, load, response, worst_low_db, worst_wide_db })
        })
        .collect()
}

pub fn psr_artifacts(runs: &[PsrRun]) -> Vec<Artifact> {
    let mut out = Vec::new();
    let mut summary = String::from("mode,load_a,worst_db_1k_10k,worst_db_1k_10meg\n");
    for r in runs {
        out.push(Artifact::new(format!("psr_{}_{}.csv", r.mode, load_tag(r.load)), r.response.to_csv()));
        let _ = writeln!(summary, "{},{},{},{}", r.mode, sci9(r.load), sci9(r.worst_low_db), sci9(r.worst_wide_db));
    }
    out.push(Artifact::new("psr_summary.csv", summary));
    out
}

// ---------------------------------------------------------------- transient

#[derive(Debug, Clone, PartialEq)]
pub struct StepSettling {
    pub start: f64,
    pub rising: bool,
    pub settling: Settling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientRun {
    pub trace: TransientTrace,
    pub undershoot: f64,
    pub overshoot: f64,
    /// One entry per load edge, measured until the next disturbance.
    pub steps: Vec<StepSettling>,
}

impl TransientRun {
    /// Slowest recovery over all load edges; `None` if any edge never
    /// settles.
    pub fn worst_settling(&self) -> Option<f64> {
        self.steps.iter().try_fold(0.0_f64, |m, s| s.settling.seconds().map(|t| m.max(t)))
    }
}

/// Start of every ramp in a PWL: the last point before the value changes.
fn ramp_starts(p: &Pwl) -> Vec<(f64, bool)> {
    p.points().windows(2).filter(|w| w[1].1 != w[0].1).map(|w| (w[0].0, w[1].1 > w[0].1)).collect()
}

pub fn run_transient(params: &LdoParams, cfg: &ReportConfig) -> Result<TransientRun> {
    let stimuli = cfg.stimuli(params)?;
    let (ldo, stim, nodeset) = build_transient(params, &stimuli)?;
    let s = &cfg.transient;
    let mut opts = TransientOptions::new(s.t_end, s.tol_rel, s.tol_abs, s.max_step);
    opts.nodeset = nodeset;
    let trace = simulate_with(&ldo.circuit, &stim, &opts)?;
    let target = params.v_out_target;
    let (undershoot, overshoot) = metrics::excursions(&trace, "V_OUT", target)?;

    let load = stimuli.load.as_ref().expect("build_transient checked the load stimulus");
    let ven = stimuli.ven.as_ref().expect("build_transient checked V_EN");
    let edges = ramp_starts(load);
    let mut disturbances: Vec<f64> = edges.iter().map(|e| e.0).collect();
    disturbances.extend(ven.half_swing_crossings().iter().map(|c| c.0));
    let mut steps = Vec::new();
    for (start, rising) in edges {
        if start >= s.t_end {
            continue;
        }
        let stop = disturbances.iter().copied().filter(|t| *t > start).fold(f64::INFINITY, f64::min);
        let window = trace.window(start, stop);
        let settling = metrics::settling_time(&window, "V_OUT", target, cfg.settling_band, start)?;
        steps.push(StepSettling { start, rising, settling });
    }
    Ok(TransientRun { trace, undershoot, overshoot, steps })
}

pub fn transient_artifacts(run: &TransientRun) -> Vec<Artifact> {
    vec![Artifact::new("transient_load_step.csv", run.trace.to_csv())]
}

// ---------------------------------------------------------------- metrics

/// Measured figures of merit. TR uses the simulated undershoot; the FOM
/// and efficiency use the Low-mode quiescent current at the maximum load,
/// the pairing the published numbers are quoted for.
pub fn compute_metrics(params: &LdoParams, psr: &[PsrRun], tran: &TransientRun) -> Result<MetricsReport> {
    let i_max = params.load_high_max;
    let tr = metrics::response_time(params.c_load, tran.undershoot, i_max)?;
    let mut iq_table = vec![("low".to_string(), quiescent_current(params, Mode::Low, 0.0)?)];
    for load in [params.load_high_min, 0.5 * (params.load_high_min + params.load_high_max), params.load_high_max] {
        iq_table.push((format!("high_{}", load_tag(load)), quiescent_current(params, Mode::High, load)?));
    }
    iq_table.push(("conventional".to_string(), params.iq_conventional));
    Ok(MetricsReport {
        undershoot_v: tran.undershoot,
        overshoot_v: tran.overshoot,
        settling_time_s: tran.worst_settling(),
        response_time_s: tr,
        fom_s: metrics::fom(tr, params.iq_low, i_max)?,
        current_efficiency: metrics::current_efficiency(i_max, params.iq_low)?,
        psr_worst_db_low: psr.iter().map(|r| r.worst_low_db).fold(f64::NEG_INFINITY, f64::max),
        psr_worst_db_wide: psr.iter().map(|r| r.worst_wide_db).fold(f64::NEG_INFINITY, f64::max),
        iq_reduction_factor: metrics::iq_reduction(params.iq_conventional, params.iq_low)?,
        iq_table,
    })
}

pub fn metrics_artifacts(m: &MetricsReport) -> Vec<Artifact> {
    vec![Artifact::new("metrics.csv", m.to_csv()), Artifact::new("metrics.txt", m.to_table())]
}

// ---------------------------------------------------------------- checks

fn band(name: impl Into<String>, value: f64, unit: &'static str, lo: f64, hi: f64, published: &str) -> Check {
    Check {
        name: name.into(),
        value,
        unit,
        rule: format!("[{}, {}]", format_sci(lo, 6), format_sci(hi, 6)),
        published: published.into(),
        pass: value >= lo && value <= hi,
    }
}

fn above(name: impl Into<String>, value: Option<f64>, unit: &'static str, bound: f64, published: &str) -> Check {
    Check {
        name: name.into(),
        value: value.unwrap_or(f64::NAN),
        unit,
        rule: format!("> {}", format_sci(bound, 6)),
        published: published.into(),
        pass: value.is_some_and(|v| v > bound),
    }
}

fn at_most(name: impl Into<String>, value: f64, unit: &'static str, bound: f64, published: &str) -> Check {
    Check {
        name: name.into(),
        value,
        unit,
        rule: format!("<= {}", format_sci(bound, 6)),
        published: published.into(),
        pass: value <= bound,
    }
}

fn exact(name: impl Into<String>, value: f64, unit: &'static str, expected: f64, published: &str) -> Check {
    Check {
        name: name.into(),
        value,
        unit,
        rule: format!("== {}", format_sci(expected, 6)),
        published: published.into(),
        pass: value == expected,
    }
}

/// Closed-form figures of merit at the published operating point.
pub fn identity_checks(params: &LdoParams) -> Result<Vec<Check>> {
    let tr = metrics::response_time(params.c_load, 0.100, params.load_high_max)?;
    let fom = metrics::fom(tr, params.iq_low, params.load_high_max)?;
    let eff = metrics::current_efficiency(params.load_high_max, params.iq_low)?;
    Ok(vec![
        band("response_time_100mV", tr, "s", 1.07e-9 * 0.99, 1.07e-9 * 1.01, "1.07 ns"),
        band("fom_100mV", fom, "s", 0.21e-12 * 0.97, 0.21e-12 * 1.03, "0.21 ps"),
        band("current_efficiency_max", eff * 100.0, "%", 99.98 - 0.005, 99.98 + 0.005, "99.98 %"),
        exact("iq_reduction", metrics::iq_reduction(params.iq_conventional, params.iq_low)?, "1", 14.0, "14x"),
    ])
}

pub fn stability_checks(runs: &[LoopGainRun]) -> Vec<Check> {
    let mut out = Vec::new();
    let find = |mode: Mode, load: f64, port: &str, buffer: bool| {
        runs.iter().find(|r| r.mode == mode && r.load == load && r.port == port && r.buffer == buffer)
    };
    if let Some(r) = find(Mode::Low, 0.0, "overall", true) {
        let u = r.result.ugbw_hz.unwrap_or(f64::NAN);
        out.push(band("ugbw_low_0A", u, "Hz", 3e6, 6e6, "4.5 MHz"));
    }
    if let Some(r) = find(Mode::High, 15e-3, "overall", true) {
        let u = r.result.ugbw_hz.unwrap_or(f64::NAN);
        out.push(band("ugbw_high_15mA", u, "Hz", 120e6, 200e6, "165 MHz"));
    }
    for r in runs.iter().filter(|r| r.buffer) {
        out.push(above(
            format!("pm_{}_{}_{}", r.port, r.mode, load_tag(r.load)),
            r.result.phase_margin_deg,
            "deg",
            45.0,
            "stable",
        ));
    }
    for nb in runs.iter().filter(|r| !r.buffer) {
        if let Some(with) = find(nb.mode, nb.load, "overall", true) {
            let (a, b) = (with.result.phase_margin_deg, nb.result.phase_margin_deg);
            let delta = match (a, b) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            };
            out.push(above(
                format!("buffer_pm_gain_{}_{}", nb.mode, load_tag(nb.load)),
                delta,
                "deg",
                0.0,
                "buffer improves stability",
            ));
        }
    }
    out
}

pub fn psr_checks(runs: &[PsrRun]) -> Vec<Check> {
    let mut out = Vec::new();
    for r in runs {
        let tag = format!("{}_{}", r.mode, load_tag(r.load));
        out.push(at_most(format!("psr_1k_10k_{tag}"), r.worst_low_db, "dB", -40.0, "-40 dB to 10 kHz"));
        out.push(at_most(format!("psr_1k_10meg_{tag}"), r.worst_wide_db, "dB", -32.0, "-32 dB to 10 MHz"));
    }
    out
}

pub fn transient_checks(run: &TransientRun) -> Vec<Check> {
    vec![
        band("undershoot", run.undershoot, "V", 0.070, 0.130, "100 mV"),
        band("overshoot", run.overshoot, "V", 0.040, 0.080, "60 mV"),
        Check {
            name: "settling_1pct".into(),
            value: run.worst_settling().unwrap_or(f64::INFINITY),
            unit: "s",
            rule: "< 5.00000e-7".into(),
            published: "< 500 ns".into(),
            pass: !run.steps.is_empty() && run.worst_settling().is_some_and(|t| t < 500e-9),
        },
    ]
}

pub fn iq_checks(params: &LdoParams) -> Result<Vec<Check>> {
    Ok(vec![
        exact("iq_low", quiescent_current(params, Mode::Low, 0.0)?, "A", 3e-6, "3 uA"),
        exact("iq_high_5mA", quiescent_current(params, Mode::High, 5e-3)?, "A", 50e-6, "50 uA"),
        exact("iq_high_15mA", quiescent_current(params, Mode::High, 15e-3)?, "A", 110e-6, "110 uA"),
    ])
}

pub fn comparison_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,value,unit,rule,published,result\n");
    for c in checks {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.name,
            format_sci(c.value, 6),
            c.unit,
            c.rule.replace(',', ";"),
            c.published,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    s
}

pub fn comparison_table(checks: &[Check]) -> String {
    let w = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let rw = checks.iter().map(|c| c.rule.len()).max().unwrap_or(4).max(4);
    let mut s = format!("{:<w$}  {:>13}  {:<4}  {:<rw$}  {:<26}  result\n", "check", "value", "unit", "rule", "published");
    for c in checks {
        let _ = writeln!(
            s,
            "{:<w$}  {:>13}  {:<4}  {:<rw$}  {:<26}  {}",
            c.name,
            format_sci(c.value, 6),
            c.unit,
            c.rule,
            c.published,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let _ = writeln!(s, "\n{} checks, {} failed", checks.len(), failed);
    s
}

// ---------------------------------------------------------------- plots

const PLOT_LOOPGAIN: &str = r##"import csv, glob, math
import matplotlib.pyplot as plt

fig, (am, ph) = plt.subplots(2, 1, sharex=True)
for path in sorted(glob.glob("loopgain_overall_*.csv")):
    rows = list(csv.DictReader(open(path)))
    f = [float(r["freq_hz"]) for r in rows]
    am.semilogx(f, [float(r["mag_db"]) for r in rows], label=path[9:-4])
    ph.semilogx(f, [float(r["phase_deg"]) for r in rows])
am.axhline(0, color="k", lw=0.5)
am.set_ylabel("|T| (dB)")
ph.set_ylabel("phase (deg)")
ph.set_xlabel("frequency (Hz)")
am.legend(fontsize=7)
fig.savefig("loopgain.png", dpi=150)
"##;

const PLOT_PSR: &str = r##"import csv, glob
import matplotlib.pyplot as plt

for path in sorted(glob.glob("psr_*_*.csv")):
    if path.endswith("summary.csv"):
        continue
    rows = list(csv.DictReader(open(path)))
    plt.semilogx([float(r["freq_hz"]) for r in rows], [float(r["mag_db"]) for r in rows], label=path[4:-4])
plt.xlabel("frequency (Hz)")
plt.ylabel("PSR (dB)")
plt.legend()
plt.savefig("psr.png", dpi=150)
"##;

const PLOT_TRANSIENT: &str = r##"import csv
import matplotlib.pyplot as plt

lines = [l for l in open("transient_load_step.csv") if not l.startswith("#")]
rows = list(csv.DictReader(lines))
t = [float(r["time_s"]) * 1e6 for r in rows]
fig, (v, e) = plt.subplots(2, 1, sharex=True)
v.plot(t, [float(r["V_OUT"]) for r in rows])
v.set_ylabel("V_OUT (V)")
e.plot(t, [float(r["V_EN"]) for r in rows])
e.set_ylabel("V_EN (V)")
e.set_xlabel("time (us)")
fig.savefig("transient.png", dpi=150)
"##;

pub fn plot_scripts() -> Vec<Artifact> {
    vec![
        Artifact::new("plot_loopgain.py", PLOT_LOOPGAIN.to_string()),
        Artifact::new("plot_psr.py", PLOT_PSR.to_string()),
        Artifact::new("plot_transient.py", PLOT_TRANSIENT.to_string()),
    ]
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub metrics: MetricsReport,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Everything: loop gains, PSR, the load-step transient, metrics and the
/// pass/fail comparison. The three analyses run concurrently.
pub fn run_report(params: &LdoParams, cfg: &ReportConfig) -> Result<Report> {
    let ((loops, psr), tran) = rayon::join(
        || rayon::join(|| run_loopgain(params, cfg), || run_psr(params, cfg)),
        || run_transient(params, cfg),
    );
    let (loops, psr, tran) = (loops?, psr?, tran?);
    let metrics = compute_metrics(params, &psr, &tran)?;

    let mut checks = identity_checks(params)?;
    checks.extend(stability_checks(&loops));
    checks.extend(psr_checks(&psr));
    checks.extend(transient_checks(&tran));
    checks.extend(iq_checks(params)?);
    let tr_lo = metrics::response_time(params.c_load, 0.070, params.load_high_max)?;
    let tr_hi = metrics::response_time(params.c_load, 0.130, params.load_high_max)?;
    checks.push(band("response_time_measured", metrics.response_time_s, "s", tr_lo, tr_hi, "1.07 ns"));

    let mut artifacts = loopgain_artifacts(&loops);
    artifacts.extend(psr_artifacts(&psr));
    artifacts.extend(transient_artifacts(&tran));
    artifacts.extend(metrics_artifacts(&metrics));
    artifacts.push(Artifact::new("comparison.csv", comparison_csv(&checks)));
    artifacts.push(Artifact::new("comparison.txt", comparison_table(&checks)));
    artifacts.extend(plot_scripts());
    Ok(Report { artifacts, checks, metrics })
}

// ---------------------------------------------------------------- reference transfer

/// Closed-loop V_REF to V_OUT transfer over `[sweep]` at every loop-gain
/// operating point.
pub fn run_ac(params: &LdoParams, cfg: &ReportConfig) -> Result<Vec<Artifact>> {
    let runs: Vec<Artifact> = cfg
        .loop_points
        .par_iter()
        .map(|&(mode, load)| {
            let mut ldo = build_small_signal(params, mode, load)?;
            let vref = ldo.nodes.vref;
            let src = ldo
                .circuit
                .elements()
                .iter()
                .position(|e| matches!(e, Element::VSource { pos, .. } if *pos == vref))
                .map(ElementId)
                .expect("the model drives V_REF from a source");
            ldo.circuit.set_ac(src, 1.0)?;
            let r = ac::ac_sweep(&ldo.circuit, &cfg.loop_sweep, src, ldo.nodes.out)?;
            Ok(Artifact::new(format!("ac_ref_{}_{}.csv", mode, load_tag(load)), r.to_csv()))
        })
        .collect::<Result<_>>()?;
    Ok(runs)
}

// ---------------------------------------------------------------- netlists

fn resolve_node(circuit: &Circuit, spec: Option<&str>) -> Result<NodeId> {
    match spec {
        Some(s) => circuit
            .node(s)
            .or_else(|| s.parse::<usize>().ok().filter(|n| *n < circuit.node_count()).map(NodeId))
            .ok_or_else(|| Error::Config(format!("[ac] output `{s}` is neither a label nor a node index"))),
        None => Ok(circuit.node("out").unwrap_or(NodeId(circuit.node_count().saturating_sub(1)))),
    }
}

fn resolve_input(circuit: &Circuit, input: Option<ElementId>) -> Result<ElementId> {
    let is_source = |e: &Element| matches!(e, Element::VSource { .. } | Element::ISource { .. });
    match input {
        Some(id) => match circuit.element(id) {
            Some(e) if is_source(e) => Ok(id),
            _ => Err(Error::Config(format!("[ac] input {} is not a source element", id.0))),
        },
        None => circuit
            .elements()
            .iter()
            .position(|e| matches!(e, Element::VSource { ac, .. } | Element::ISource { ac, .. } if *ac != 0.0))
            .map(ElementId)
            .ok_or_else(|| Error::Config("netlist has no source with a nonzero AC magnitude".into())),
    }
}

/// Transfer sweep of a user netlist over `[sweep]`.
pub fn netlist_ac(circuit: &Circuit, cfg: &ReportConfig) -> Result<Vec<Artifact>> {
    let input = resolve_input(circuit, cfg.ac_input)?;
    let output = resolve_node(circuit, cfg.ac_output.as_deref())?;
    let r = ac::ac_sweep(circuit, &cfg.loop_sweep, input, output)?;
    Ok(vec![Artifact::new("ac.csv", r.to_csv())])
}

/// Loop gain at every break port of a user netlist.
pub fn netlist_loopgain(circuit: &Circuit, cfg: &ReportConfig) -> Result<Vec<Artifact>> {
    let labels = circuit.break_labels();
    if labels.is_empty() {
        return Err(Error::Config("netlist has no BREAK ports".into()));
    }
    let op = dc_operating_point_with(circuit, &DcOptions::default())?;
    let mut out = Vec::new();
    let mut summary = String::from("port,dc_gain_db,ugbw_hz,phase_margin_deg\n");
    for label in labels {
        let r = ac::loop_gain_at(circuit, &op, &label, &cfg.loop_sweep, 1.0)?;
        let _ = writeln!(summary, "{label},{},{},{}", sci9(r.dc_gain_db), opt_sci(r.ugbw_hz), opt_sci(r.phase_margin_deg));
        out.push(Artifact::new(format!("loopgain_{label}.csv"), r.response.to_csv()));
    }
    out.push(Artifact::new("loopgain_summary.csv", summary));
    Ok(out)
}

/// Supply-rejection sweep of a user netlist over `[psr]`.
pub fn netlist_psr(circuit: &Circuit, cfg: &ReportConfig) -> Result<Vec<Artifact>> {
    let input = resolve_input(circuit, cfg.ac_input)?;
    let output = resolve_node(circuit, cfg.ac_output.as_deref())?;
    let r = ac::psr(circuit, &cfg.psr_sweep, input, output)?;
    Ok(vec![Artifact::new("psr.csv", r.to_csv())])
}
