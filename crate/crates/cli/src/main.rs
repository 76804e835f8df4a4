//! Batch front end for the regulator simulator.
//!
//! Exit status: 0 success, 2 configuration or I/O problem, 3 solver
//! failure, 4 a `report` comparison row failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fvfldo::ldo::{LdoParams, DEFAULT_PARAMS};
use fvfldo::netlist::{parse_netlist, Circuit};
use fvfldo::report::{self, Artifact, ReportConfig};
use fvfldo::Error;
use sha2::{Digest, Sha256};

const THREADS_ENV: &str = "FVFLDO_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Ac,
    Loopgain,
    Transient,
    Psr,
    Metrics,
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "fvfldo", version, about = "Behavioural simulator for a dual-range FVF LDO")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Parameter file overriding the shipped calibration.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Netlist replacing the built-in model (ac, loopgain, psr only).
    #[arg(long)]
    netlist: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Solver(String),
    Acceptance(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Acceptance(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Vec<String>, Failure> {
    configure_threads()?;
    let config_text = match &cli.config {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let params_text = match &cli.params {
        Some(p) => read(p)?,
        None => DEFAULT_PARAMS.to_string(),
    };
    let cfg = ReportConfig::parse(&config_text)?;
    let params = LdoParams::parse(&params_text)?;
    let netlist: Option<Circuit> = match &cli.netlist {
        Some(p) => Some(parse_netlist(&read(p)?)?),
        None => None,
    };

    let mut notes = Vec::new();
    let mut failed = 0;
    let artifacts: Vec<Artifact> = match (cli.command, &netlist) {
        (Command::Ac, Some(c)) => report::netlist_ac(c, &cfg)?,
        (Command::Loopgain, Some(c)) => report::netlist_loopgain(c, &cfg)?,
        (Command::Psr, Some(c)) => report::netlist_psr(c, &cfg)?,
        (cmd, Some(_)) => {
            return Err(Failure::Config(format!("--netlist is not supported by `{cmd:?}`").to_lowercase()));
        }
        (Command::Ac, None) => report::run_ac(&params, &cfg)?,
        (Command::Loopgain, None) => report::loopgain_artifacts(&report::run_loopgain(&params, &cfg)?),
        (Command::Psr, None) => report::psr_artifacts(&report::run_psr(&params, &cfg)?),
        (Command::Transient, None) => report::transient_artifacts(&report::run_transient(&params, &cfg)?),
        (Command::Metrics, None) => {
            let (psr, tran) = rayon::join(|| report::run_psr(&params, &cfg), || report::run_transient(&params, &cfg));
            report::metrics_artifacts(&report::compute_metrics(&params, &psr?, &tran?)?)
        }
        (Command::Report, None) => {
            let r = report::run_report(&params, &cfg)?;
            failed = r.checks.iter().filter(|c| !c.pass).count();
            notes.push(format!("{} checks, {failed} failed", r.checks.len()));
            r.artifacts
        }
    };

    // All computation is done; write in the fixed artifact order.
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Config(format!("{}: {e}", cli.out.display())))?;
    let meta = format!("config_sha256={}\nparams_sha256={}\n", sha256(&config_text), sha256(&params_text));
    for a in &artifacts {
        let path = cli.out.join(&a.name);
        let write = |p: &Path, s: &str| fs::write(p, s).map_err(|e| Failure::Config(format!("{}: {e}", p.display())));
        write(&path, &a.contents)?;
        write(&cli.out.join(format!("{}.meta", a.name)), &meta)?;
    }
    notes.push(format!("wrote {} artifacts to {}", artifacts.len(), cli.out.display()));
    if failed > 0 {
        for n in notes {
            eprintln!("{n}");
        }
        return Err(Failure::Acceptance(failed));
    }
    Ok(notes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(notes) => {
            for n in notes {
                eprintln!("{n}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Solver(m) => eprintln!("solver error: {m}"),
                Failure::Acceptance(n) => eprintln!("{n} comparison rows failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
