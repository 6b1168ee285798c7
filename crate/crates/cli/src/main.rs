//! `ordscore`: reproducible scorecard runs driven by one TOML file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Loaded;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "ordscore", version, about = "Learn and evaluate ordinal risk scorecards")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the run file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; defaults to the run file's `out`, else `out/` beside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate synthetic encounters and split them into cohorts.
    Simulate,
    /// Partition an encounter file into training, test and holdout sets.
    Partition,
    /// Fit a scorecard (relaxation, exact search, or both).
    Fit,
    /// Metrics, tables, curves and histograms for one scorecard.
    Evaluate,
    /// Side-by-side coefficient table of several scorecards.
    Report,
    /// Cross-validated sweep over loss weights.
    Grid,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Partition => "partition",
            Command::Fit => "fit",
            Command::Evaluate => "evaluate",
            Command::Report => "report",
            Command::Grid => "grid",
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let Some(path) = &cli.config else {
        return error::config("--config is required");
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return error::config("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::Config(e.to_string()))?;
    }
    let run = Loaded::read(path, cli.seed)?;
    log::info!("config digest {}", run.digest);
    let out = run.out_dir(cli.out.as_deref());
    commands::run(cli.command.name(), &run, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORDSCORE_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
