//! `polyfract` experiment runner.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] polyfract::Error),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use polyfract::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Size { .. } | E::InvalidGraph(_) | E::Parse { .. }) => 2,
            CliError::Core(E::Output(_)) | CliError::Io(_) => 1,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "polyfract", version, about = "Directed polymers on fractal graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format; overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build and serialize the graph.
    Graph,
    /// Return-probability profile and dimension estimates.
    Heatkernel,
    /// Per-replica partition-function traces and the free-energy estimate.
    Freeenergy,
    /// Free-energy gap over a beta grid and its fitted exponent.
    Gapscan,
    /// Fractional-moment contraction sum over a parameter grid.
    Cgupper,
    /// Coarse-grained site states and conditional densities.
    Cglower,
    /// Oriented site percolation survival table.
    Percolation,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = config::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    cfg.run.seed = Some(cfg.seed());
    if let Some(f) = cli.format {
        cfg.output.format = Some(f);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = Some(dir.display().to_string());
    }
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let dir = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| ".".into()));
    let sink = output::Sink::new(&dir, cfg.output.format.unwrap_or_default(), &cfg)?;
    match cli.command {
        Command::Graph => commands::graph(&cfg, &sink),
        Command::Heatkernel => commands::heatkernel(&cfg, &sink),
        Command::Freeenergy => commands::freeenergy(&cfg, &sink),
        Command::Gapscan => commands::gapscan(&cfg, &sink),
        Command::Cgupper => commands::cgupper(&cfg, &sink),
        Command::Cglower => commands::cglower(&cfg, &sink),
        Command::Percolation => commands::percolation(&cfg, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyfract: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
