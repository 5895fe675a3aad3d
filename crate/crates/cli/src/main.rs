//! gridtrace: batch front end for ingestion, counterfactual baselines,
//! regression analysis, study recipes, and plot emission.
//!
//! Exit codes: 0 success, 2 usage/validation, 3 I/O, 4 numerical failure.

mod cmd_baseline;
mod cmd_ingest;
mod cmd_regress;
mod cmd_study;
mod cmd_viz;
mod util;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::path::PathBuf;
use util::CliError;

#[derive(Parser)]
#[command(name = "gridtrace", version, about = "Grid time-series impact analysis")]
struct Cli {
    /// Root seed for all stochastic steps. Precedence: this flag, then the
    /// GRIDTRACE_SEED environment variable, then the config file, then 42.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run config providing defaults (currently: seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and repair wide-frame CSVs, emitting a quality report.
    Ingest(cmd_ingest::IngestArgs),
    /// Estimate a counterfactual baseline and write a baseline CSV.
    Baseline(cmd_baseline::BaselineArgs),
    /// OLS / VAR estimation and the statistical-test battery.
    #[command(subcommand)]
    Regress(cmd_regress::RegressCmd),
    /// Run a study recipe described by a JSON config.
    Study(cmd_study::StudyArgs),
    /// Build plot data (JSON) and render SVG charts.
    #[command(subcommand)]
    Viz(cmd_viz::VizCmd),
}

#[derive(Deserialize, Default)]
struct RunConfig {
    seed: Option<u64>,
}

fn resolve_seed(cli: &Cli) -> Result<u64, CliError> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    if let Ok(env) = std::env::var("GRIDTRACE_SEED") {
        return env
            .parse()
            .map_err(|_| util::usage(format!("GRIDTRACE_SEED={env:?} is not an integer")));
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        if let Some(s) = config.seed {
            return Ok(s);
        }
    }
    Ok(42)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = resolve_seed(&cli)?;
    match cli.command {
        Command::Ingest(args) => cmd_ingest::run(args, seed),
        Command::Baseline(args) => cmd_baseline::run(args, seed),
        Command::Regress(cmd) => cmd_regress::run(cmd, seed),
        Command::Study(args) => cmd_study::run(args, seed),
        Command::Viz(cmd) => cmd_viz::run(cmd, seed),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("gridtrace: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
