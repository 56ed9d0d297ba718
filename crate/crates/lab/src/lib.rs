//! Scenario runner for the harmonic map flow laboratory: config files,
//! subcommands, and deterministic output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use commands::{execute, Artifact, Command, Report};
pub use config::ScenarioConfig;
pub use error::LabError;

use io::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "hmflab", version, about = "Numerical laboratory for 1-equivariant harmonic map flow")]
struct Cli {
    /// Scenario file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "hmflab-out")]
    out: PathBuf,
    /// Tail exponent(s), comma separated; overrides the config.
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// PDE runs per gamma plus the trichotomy verdict.
    Simulate,
    /// Scale-equation solve and residual profile.
    MuSolve,
    /// Error-decomposition identity on the (r, t) slab.
    VerifyAnsatz,
    /// C_gamma table.
    Constants,
    /// Feasibility witnesses for the exponent systems.
    Constraints,
    /// Logarithmic integral checks.
    CheckIntegrals,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::MuSolve => Command::MuSolve,
            Sub::VerifyAnsatz => Command::VerifyAnsatz,
            Sub::Constants => Command::Constants,
            Sub::Constraints => Command::Constraints,
            Sub::CheckIntegrals => Command::CheckIntegrals,
        }
    }
}

/// Loads the config file (defaults when absent) and applies the `--gamma` override.
pub fn load_config(path: Option<&Path>, gamma: Option<&str>) -> Result<ScenarioConfig, LabError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| LabError::Config(format!("cannot read {}: {e}", p.display())))?;
            config::parse(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(g) = gamma {
        cfg.override_gamma(g)?;
    }
    Ok(cfg)
}

/// Runs `command` and writes its files, the manifest and `timing.txt` under `out`.
///
/// Everything except `timing.txt` is byte-identical across repeated runs.
pub fn run_scenario(cfg: &ScenarioConfig, command: Command, out: &Path) -> Result<Report, LabError> {
    let start = Instant::now();
    let report = execute(cfg, command)?;
    let mut dir = OutputDir::create(out)?;
    for a in &report.artifacts {
        match a {
            Artifact::Csv { name, table } => dir.csv(name, table)?,
            Artifact::CsvDat { name, table, block } => dir.csv_and_dat(name, table, *block)?,
            Artifact::Markdown { name, text } => dir.write(name, text)?,
        }
    }
    let files = dir.written().to_vec();
    dir.write("manifest.txt", &io::manifest(command.name(), &cfg.entries(), &report.derived, &files))?;
    dir.write("timing.txt", &format!("wall_time_seconds = {:.3}\n", start.elapsed().as_secs_f64()))?;
    Ok(report)
}

/// The command-line entry point; returns the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = load_config(cli.config.as_deref(), cli.gamma.as_deref())
        .and_then(|cfg| run_scenario(&cfg, cli.command.into(), &cli.out));
    match result {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            println!("wrote {}", cli.out.display());
            0
        }
        Err(e) => {
            eprintln!("hmflab: {e}");
            e.exit_code()
        }
    }
}
