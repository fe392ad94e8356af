//! Command-line front end: ingestion, pipeline orchestration and reports.
//!
//! Every command is a pure function of its input files, the config and the
//! seed. JSON artifacts carry a `schema_version` field.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the log filter (e.g. `info`).
pub const LOG_ENV: &str = "FNAR_LOG";

#[derive(Debug, Parser)]
#[command(name = "fnar", version, about = "Factor network autoregression toolkit")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Flow records to a weight panel bundle plus a validation report.
    Ingest,
    /// Network factors and diagnostics.
    Factors,
    /// FNAR coefficients.
    Estimate,
    /// Residual-bootstrap intervals.
    Bootstrap,
    /// Recursive one-step forecast comparison.
    Forecast,
    /// Monte Carlo rate experiments.
    Simulate,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    io::create_dir(&cli.out)?;
    match cli.command {
        Command::Ingest => ingest::run(&cfg, &cli.out),
        Command::Factors => commands::factors(&cfg, &cli.out),
        Command::Estimate => commands::estimate(&cfg, &cli.out),
        Command::Bootstrap => commands::bootstrap(&cfg, &cli.out),
        Command::Forecast => commands::forecast(&cfg, &cli.out),
        Command::Simulate => commands::simulate(&cfg, &cli.out),
    }
}
