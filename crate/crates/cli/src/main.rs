//! `dsd`: generate libraries, dock, train surrogates, screen and evaluate.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage or
//! configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Marks an error as the caller's fault (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "dsd", version, about = "Surrogate docking: train a graph network on a docked sample and screen a library with it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random molecule library (one SMILES per line).
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a library with the synthetic docking oracle.
    Dock {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Disable noise and failed-docking injection.
        #[arg(long)]
        noise_free: bool,
    },
    /// Train a surrogate on a `smiles,dock_score` dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a library with a trained checkpoint.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full sample, train, infer and re-dock workflow.
    Screen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Compare predicted against true scores.
    Metrics {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long = "true")]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the RES surface CSV; defaults next to `--out`.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Train and evaluate every combination of a hyperparameter grid.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param_grid: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DSD_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData { common, count, out } => commands::gen_data(&common, count, out),
        Command::Dock {
            common,
            input,
            out,
            noise_free,
        } => commands::dock(&common, input, &out, noise_free),
        Command::Train { common, data, out } => commands::train(&common, data, out),
        Command::Infer { checkpoint, input, out } => commands::infer(&checkpoint, &input, &out),
        Command::Screen { common, library, outdir } => commands::screen(&common, library, outdir),
        Command::Metrics {
            config,
            truth,
            pred,
            out,
            surface,
        } => commands::metrics(config, &truth, &pred, &out, surface),
        Command::Grid {
            common,
            param_grid,
            data,
            outdir,
        } => commands::grid(&common, &param_grid, data, outdir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
