//! Command-line front end: reads a scenario file, runs the simulator and
//! writes plot-ready CSV and JSON files.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 infeasible
//! configuration, 5 input/output, 6 failed consistency check.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{parse_config, Overrides, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_CHECK: i32 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    /// Starts with the path of the offending field.
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Io { .. } => EXIT_IO,
            CliError::CheckFailed(_) => EXIT_CHECK,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Infeasible(_) => "infeasible",
            CliError::Io { .. } => "io",
            CliError::CheckFailed(_) => "check",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "metro-junction",
    version,
    about = "Train dynamics on a metro line with a junction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario and print the line summary.
    Validate(CommonArgs),
    /// Simulate one (m, dm) point: departures.csv and summary.json.
    Simulate(PointArgs),
    /// Sweep the (m, dm) grid: phase_diagram.csv.
    Sweep(CommonArgs),
    /// Sweep and extract the phase boundaries: boundaries.csv and boundary_fit.csv.
    Boundaries(CommonArgs),
    /// Sweep the scenario and its demand variant: comparison.csv and boundary_shift.csv.
    Compare(CommonArgs),
    /// Compare the recursion with the train-by-train simulation and, without
    /// demand, with the max-plus cycle time: oracle_check.csv.
    OracleCheck(PointArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Simulated periods K.
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    counts: Option<u64>,
    /// Fraction of the periods discarded as transient.
    #[arg(long, value_name = "F")]
    transient: Option<f64>,
    /// Worker threads for the sweep.
    #[arg(long, value_name = "N")]
    parallel: Option<NonZeroUsize>,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of trains.
    #[arg(long)]
    m: Option<usize>,
    /// Branch 2 minus branch 1 train count.
    #[arg(long, allow_hyphen_values = true)]
    dm: Option<i64>,
}

/// Run the command line `args` (program name first) and return the exit code.
pub fn run_cli<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.class());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (common, m, dm) = match &cli.command {
        Command::Validate(c) | Command::Sweep(c) | Command::Boundaries(c) | Command::Compare(c) => {
            (c, None, None)
        }
        Command::Simulate(p) | Command::OracleCheck(p) => (&p.common, p.m, p.dm),
    };
    if common.transient.is_some_and(|f| !(0.0..1.0).contains(&f)) {
        return Err(CliError::Config("--transient: must lie in [0, 1)".into()));
    }
    let text =
        std::fs::read_to_string(&common.config).map_err(|e| CliError::io(&common.config, e))?;
    let overrides = Overrides {
        periods: common.counts.map(|k| k as usize),
        transient_fraction: common.transient,
        m,
        dm,
    };
    let scenario = Scenario::from_config(parse_config(&text)?, &overrides)?;

    // the report is collected first: the pool may run the command on another thread
    let mut report = String::new();
    let out = common.out.as_path();
    let run = |report: &mut String| match &cli.command {
        Command::Validate(_) => commands::validate(&scenario, report),
        Command::Simulate(_) => commands::simulate(&scenario, out, report),
        Command::Sweep(_) => commands::sweep(&scenario, out, report),
        Command::Boundaries(_) => commands::boundaries(&scenario, out, report),
        Command::Compare(_) => commands::compare(&scenario, out, report),
        Command::OracleCheck(_) => commands::oracle_check(&scenario, out, report),
    };
    let result = match common.parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.get())
            .build()
            .map_err(|e| CliError::Config(format!("--parallel: {e}")))?
            .install(|| run(&mut report)),
        None => run(&mut report),
    };
    let _ = stdout.write_all(report.as_bytes());
    result
}
