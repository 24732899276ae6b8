//! Command-line driver: config loading, validation, dispatch and output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anderson_lab::experiments::{persist, RunManifest};
use anderson_lab::parallel::with_workers;
use anderson_lab::LabError;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod expect;

pub use commands::Outcome;
pub use config::{Config, Format, Violation};
pub use expect::{Check, Observable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "anderson-lab", version, about = "Numerical experiments on one-dimensional random Schrodinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON scenario config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides `sampling.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "ANDERSON_LAB_WORKERS")]
    pub workers: Option<usize>,

    /// Output directory for CSV, JSON and manifest. Without it the table is
    /// written to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Exit with status 3 when an expectation fails.
    #[arg(long, global = true)]
    pub assert: bool,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq, Debug)]
pub enum Command {
    /// Monte Carlo Lyapunov exponent.
    Lyapunov,
    /// Large-deviation curve and fitted rate.
    Lde,
    /// Compare tails under the perturbed and stationary laws.
    LiftCheck,
    /// Summability conditions of the density sequence.
    Conditions,
    /// Eigenfunction decay in a spectral interval.
    Localize,
    /// Singular-site census.
    Census,
    /// Edge-zone violations of the growth bound.
    EdgeCensus,
    /// Uniform upper bound on finite-volume exponents.
    CraigSimon,
    /// Eigenpairs of one box.
    Spectrum,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::Lde => "lde",
            Command::LiftCheck => "lift-check",
            Command::Conditions => "conditions",
            Command::Localize => "localize",
            Command::Census => "census",
            Command::EdgeCensus => "edge-census",
            Command::CraigSimon => "craig-simon",
            Command::Spectrum => "spectrum",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Self::all().into_iter().find(|c| c.name() == s)
    }

    pub fn all() -> [Command; 9] {
        [
            Command::Lyapunov,
            Command::Lde,
            Command::LiftCheck,
            Command::Conditions,
            Command::Localize,
            Command::Census,
            Command::EdgeCensus,
            Command::CraigSimon,
            Command::Spectrum,
        ]
    }
}

/// Everything a run produced, before it is written anywhere.
pub struct Run {
    pub config: Config,
    pub raw: Value,
    pub outcome: Outcome,
}

/// Load and validate a config for `command`. No random numbers are drawn.
pub fn load(path: &Path, command: Command, seed: Option<u64>) -> Result<(Config, Value), Vec<Violation>> {
    let raw = config::read(path)?;
    let cfg = config::validate(&raw, command, seed)?;
    Ok((cfg, raw))
}

/// Validate and execute without writing output.
pub fn execute(path: &Path, command: Command, seed: Option<u64>, workers: Option<usize>) -> Result<Run, RunError> {
    let (cfg, raw) = load(path, command, seed).map_err(RunError::Invalid)?;
    let w = workers.or(cfg.sampling.workers).unwrap_or(0);
    let outcome = with_workers(w, || commands::execute(command, &cfg)).map_err(RunError::Lab)?;
    Ok(Run {
        config: cfg,
        raw,
        outcome,
    })
}

#[derive(Debug)]
pub enum RunError {
    Invalid(Vec<Violation>),
    Lab(LabError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => EXIT_USAGE,
            RunError::Lab(LabError::InvalidParameter { .. } | LabError::InvalidMeasure(_) | LabError::InvalidDensity(_)) => {
                EXIT_USAGE
            }
            RunError::Lab(_) => EXIT_RUNTIME,
        }
    }

    fn report(&self) {
        match self {
            RunError::Invalid(v) => {
                for x in v {
                    eprintln!("error: {x}");
                }
            }
            RunError::Lab(e) => eprintln!("error: {e}"),
        }
    }
}

/// Checks from the config's expectations plus pinned values, if requested.
pub fn all_checks(path: &Path, run: &Run) -> Vec<Check> {
    let mut checks = run.outcome.checks.clone();
    let Some(key) = run.config.experiment.expect.as_ref().and_then(|e| e.pinned.clone()) else {
        return checks;
    };
    let file = path.parent().unwrap_or(Path::new(".")).join(expect::EXPECTATIONS_FILE);
    match expect::load_expectations(&file) {
        Err(e) => checks.push(Check::new(format!("pinned {key}"), false, e)),
        Ok(all) => match all.get(&key) {
            None => checks.push(Check::new(format!("pinned {key}"), false, format!("no entry in {}", file.display()))),
            Some(entry) => checks.extend(expect::check_pinned(&key, entry, run.config.seed(), &run.outcome.observables)),
        },
    }
    checks
}

/// Entry point shared by the binary and the tests. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(stdout, "{e}");
            } else {
                eprint!("{e}");
            }
            return code;
        }
    };
    let Some(path) = cli.config.clone() else {
        eprintln!("error: --config is required\n\nUsage: anderson-lab {} --config <FILE> [OPTIONS]", cli.command.name());
        return EXIT_USAGE;
    };
    let run = match execute(&path, cli.command, cli.seed, cli.workers) {
        Ok(r) => r,
        Err(e) => {
            e.report();
            return e.exit_code();
        }
    };
    let checks = all_checks(&path, &run);
    if let Err(e) = write_output(&cli, &run, stdout) {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "ok" } else { "FAIL" };
        eprintln!("[{}] check {tag}: {}: {}", cli.command.name(), c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        if cli.assert {
            eprintln!("error: {failed} expectation(s) failed");
            return EXIT_ASSERT;
        }
        eprintln!("warning: {failed} expectation(s) failed");
    }
    EXIT_OK
}

fn write_output(cli: &Cli, run: &Run, stdout: &mut dyn Write) -> Result<(), String> {
    let cfg = &run.config;
    let format = cli.format.or(cfg.output.format).unwrap_or(Format::Csv);
    let workers = cli.workers.or(cfg.sampling.workers).unwrap_or(0);
    let mut manifest = RunManifest::start(&run.raw, cfg.seed(), workers);
    manifest.finish();
    let observables: BTreeMap<_, _> = run.outcome.observables.clone();
    let report = json!({ "result": run.outcome.report, "observables": observables });
    if let Some(dir) = cli.out.clone().or_else(|| cfg.output.dir.clone()) {
        let stem = cfg.output.stem.clone().unwrap_or_else(|| cli.command.name().to_string());
        let paths = persist(&dir, &stem, &run.outcome.table, &report, &manifest).map_err(|e| e.to_string())?;
        for p in paths {
            eprintln!("[{}] wrote {}", cli.command.name(), p.display());
        }
        return Ok(());
    }
    let body = match format {
        Format::Csv => run.outcome.table.to_csv().map_err(|e| e.to_string())?,
        Format::Json => {
            let env = json!({ "report": report, "manifest": manifest });
            serde_json::to_string_pretty(&env).map_err(|e| e.to_string())? + "\n"
        }
    };
    stdout.write_all(body.as_bytes()).map_err(|e| e.to_string())
}
