//! `thoughtlens` command-line driver.

mod commands;
mod config;
mod mock;
mod output;
mod runtime;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Backend, RunConfig};

#[derive(Parser)]
#[command(name = "thoughtlens", version, about = "Evaluate reasoning traces against structured scene outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect thought streams and structured outputs through the gateway.
    Collect(Common),
    /// Score scenes: contentfulness, coverage/grounding and dominant entities.
    Evaluate(Common),
    /// Compare dominant subjects between two runs.
    Compare(Common),
    /// Thought-stream similarity matrix and rerun determinism report.
    Similarity(Common),
    /// Aggregate per-scene metric files into variant reports.
    Report(Common),
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Input files; replaces the config's list.
    #[arg(long, value_name = "PATH", num_args = 1..)]
    input: Vec<PathBuf>,
    /// Restrict the run to one variant (required by `collect`).
    #[arg(long, value_name = "ID")]
    variant: Option<String>,
    /// Extraction and similarity backend.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Worker threads for scene-level parallelism.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Answer upstream calls from the offline mock provider.
    #[arg(long)]
    mock: bool,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, anyhow::Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if !self.input.is_empty() {
            cfg.inputs = self.input;
        }
        if self.variant.is_some() {
            cfg.variant = self.variant;
        }
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = self.out {
            cfg.out_dir = o;
        }
        cfg.mock |= self.mock;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (run, common): (fn(&RunConfig) -> Result<(), commands::Failure>, Common) = match cli.command {
        Command::Collect(c) => (commands::collect, c),
        Command::Evaluate(c) => (commands::evaluate, c),
        Command::Compare(c) => (commands::compare, c),
        Command::Similarity(c) => (commands::similarity, c),
        Command::Report(c) => (commands::report, c),
    };
    let outcome = common
        .resolve()
        .map_err(commands::Failure::Config)
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure:#}");
            ExitCode::from(failure.exit_code())
        }
    }
}
