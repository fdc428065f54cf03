//! `biobench`: generate cohorts, fit stratification algorithms, score them and
//! run benchmark grids.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "biobench",
    version,
    about = "Benchmark semi-supervised biotype discovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a preset dataset (CSV plus truth sidecar).
    Gen {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one algorithm on one dataset; writes the model and assignments.
    Fit {
        #[arg(long)]
        algorithm: String,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the number of planted clusters in the sidecar.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// TOML or JSON with `[hydra]`, `[smilegan]`, `[surrealgan]`, `[sustain]` tables.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Wall-clock budget, e.g. `90s` or `10m`.
        #[arg(long)]
        budget: Option<String>,
    },
    /// Score an assignment (and optionally a pattern model) against ground truth.
    Score {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark grid and emit CSV, JSONL and radar charts.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Time SuStaIn EM iterations as the variable count grows.
    ProbeSustain {
        /// Comma-separated variable counts.
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<usize>,
        #[arg(long, default_value = "60s")]
        budget: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        subjects: usize,
        #[arg(long, default_value_t = 3)]
        thresholds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit reports from an existing results.jsonl.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { preset, seed, out } => commands::gen(&preset, seed, &out, argv),
        Command::Fit {
            algorithm,
            data,
            k,
            seed,
            out,
            config,
            budget,
        } => commands::fit(commands::FitArgs {
            algorithm: &algorithm,
            data: &data,
            k,
            seed,
            out: &out,
            config: config.as_deref(),
            budget: budget.as_deref(),
            argv,
        }),
        Command::Score {
            data,
            assignment,
            model,
            out,
        } => commands::score(&data, &assignment, model.as_deref(), &out, argv),
        Command::Bench {
            config,
            out,
            workers,
        } => commands::bench(&config, &out, workers, argv),
        Command::ProbeSustain {
            vars,
            budget,
            seed,
            subjects,
            thresholds,
            out,
        } => commands::probe_sustain(&vars, &budget, seed, subjects, thresholds, &out, argv),
        Command::Report { results, out } => commands::report(&results, &out, argv),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
