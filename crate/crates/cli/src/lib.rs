//! Command-line front end for the descent experiments: single runs with
//! trace export, noise-sweep convergence studies, condition diagnosis, and
//! per-iteration inequality verification.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "illposed-gd",
    about = "Gradient descent for ill-posed minimization: runs, noise sweeps, \
             condition diagnosis, per-iteration verification",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the exact iteration and one noisy iteration per (level, seed);
    /// write traces and a summary.
    Run(CommonArgs),
    /// Sweep a decreasing noise ladder and judge the error trend.
    Study(CommonArgs),
    /// Estimate the nonlinearity-condition constants and emit a report.
    Diagnose(CommonArgs),
    /// Run traces and check every applicable per-iteration inequality;
    /// exit 1 if any applicable check fails.
    Verify(CommonArgs),
}

#[derive(clap::Args)]
pub struct CommonArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` from the config; default "out").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the sweep; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also emit gnuplot scripts next to the CSV artifacts.
    #[arg(long)]
    pub gnuplot: bool,
}

fn resolve_out_dir(args: &CommonArgs, configured: Option<&Path>) -> PathBuf {
    args.out
        .clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parses, validates, dispatches; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    type Runner = fn(&config::Experiment, &Path, bool) -> Result<i32, CliError>;
    let (args, runner): (&CommonArgs, Runner) = match &cli.command {
        Command::Run(args) => (args, |exp, out, gnuplot| commands::cmd_run(exp, out, gnuplot)),
        Command::Study(args) => (args, |exp, out, gnuplot| {
            commands::cmd_study(exp, out, gnuplot)
        }),
        Command::Diagnose(args) => (args, |exp, out, _gnuplot| commands::cmd_diagnose(exp, out)),
        Command::Verify(args) => (args, |exp, out, _gnuplot| commands::cmd_verify(exp, out)),
    };

    let experiment = config::load(&args.config)?;
    let out_dir = resolve_out_dir(args, experiment.output_dir.as_deref());

    let pool = match args.workers {
        Some(workers) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| CliError::runtime(e.to_string()))?,
        ),
        None => None,
    };
    match pool {
        Some(pool) => pool.install(|| runner(&experiment, &out_dir, args.gnuplot)),
        None => runner(&experiment, &out_dir, args.gnuplot),
    }
}
