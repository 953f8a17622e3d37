//! Command-line front end for propagating parameter uncertainty through
//! hybrid (switching) dynamical systems.
//!
//! Three subcommands: `run` executes an experiment described by a JSON
//! config and writes CSV outputs plus a manifest; `compare` reports
//! per-column differences between two moment CSVs with optional pass/fail
//! limits; `hist` bins a recorded snapshot into an equal-width histogram.
//!
//! Exit codes: 0 success, 1 a threshold failed or the solver diverged,
//! 2 configuration or data errors. The environment variable
//! `HYBRID_UQ_THREADS` caps worker parallelism; results do not depend on
//! the thread count.

mod compare;
mod config;
mod hist;
mod run;
mod tabular;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hybrid-uq",
    version,
    about = "Uncertainty propagation through hybrid dynamical systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config
    Run {
        /// Path to the config file
        config: PathBuf,
    },
    /// Report per-column differences between two moment CSVs
    Compare {
        /// Reference CSV
        base: PathBuf,
        /// CSV under test; its time grid must equal or refine the base grid
        candidate: PathBuf,
        /// Fail when a column's max-abs difference exceeds VALUE (repeatable)
        #[arg(long = "linf-max", value_name = "COL=VALUE", value_parser = parse_threshold)]
        linf_max: Vec<(String, f64)>,
    },
    /// Bin a recorded snapshot from a run directory into a histogram
    Hist {
        /// Directory written by a previous `run`
        run_dir: PathBuf,
        /// Snapshot time to bin
        #[arg(long)]
        t: f64,
        /// Number of equal-width bins
        #[arg(long)]
        bins: usize,
    },
}

fn parse_threshold(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected COL=VALUE, got '{s}'"))?;
    let v: f64 = value
        .parse()
        .map_err(|_| format!("'{value}' is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("limit must be finite and nonnegative, got {v}"));
    }
    Ok((name.to_string(), v))
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("HYBRID_UQ_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("HYBRID_UQ_THREADS must be a positive integer, got '{raw}'"))?;
        ensure!(n >= 1, "HYBRID_UQ_THREADS must be at least 1, got {n}");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| match cli.command {
        Command::Run { config } => run::cmd_run(&config),
        Command::Compare {
            base,
            candidate,
            linf_max,
        } => compare::cmd_compare(&base, &candidate, &linf_max),
        Command::Hist { run_dir, t, bins } => hist::cmd_hist(&run_dir, t, bins).map(|()| true),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
