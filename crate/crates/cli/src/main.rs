//! riskcal: scoring, threshold calibration, selection, and evaluation for
//! risk-controlled selective prediction.

mod commands;
mod fmt;
mod io;

use clap::{Parser, Subcommand};

/// Seed used when neither `--seed` nor the environment override is present.
pub const DEFAULT_SEED: u64 = 42;
/// Environment variable overriding the default seed (for CI determinism);
/// an explicit `--seed` flag still wins.
pub const SEED_ENV_VAR: &str = "RISKCAL_SEED";

pub const EXIT_NO_THRESHOLD: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 3;
pub const EXIT_CONFIG_ERROR: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, empty, or malformed input (exit 3).
    Input(String),
    /// Invalid flags or configuration (exit 4).
    Config(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

const AFTER_HELP: &str = "Exit codes:\n  \
    0  success\n  \
    2  calibration found no valid threshold\n  \
    3  input error (unreadable, empty, or malformed input)\n  \
    4  configuration error (invalid flags or model spec)\n\n\
    The RISKCAL_SEED environment variable overrides the default seed (42); \
    an explicit --seed wins over both.";

#[derive(Parser)]
#[command(
    name = "riskcal",
    version,
    about = "Risk-calibrated selective prediction: score, calibrate, select, evaluate",
    after_help = AFTER_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute uncertainty scores from model-evidence records (JSONL in, JSONL out)
    Score(commands::score::ScoreArgs),
    /// Calibrate the largest uncertainty threshold certified below a risk level
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Apply a calibrated threshold to scored records
    Select(commands::select::SelectArgs),
    /// Randomized-split FDR/power evaluation over a risk-level grid (CSV out)
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Monte Carlo validation of the calibration guarantee on a synthetic model
    Simulate(commands::simulate::SimulateArgs),
    /// Compare against the conformal p-value + Benjamini-Hochberg baseline (CSV out)
    Baseline(commands::baseline::BaselineArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    std::process::exit(0);
                }
                _ => {
                    eprint!("{e}");
                    std::process::exit(EXIT_CONFIG_ERROR);
                }
            }
        }
    };

    let result = match cli.command {
        Command::Score(args) => commands::score::run(args),
        Command::Calibrate(args) => commands::calibrate::run(args),
        Command::Select(args) => commands::select::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Baseline(args) => commands::baseline::run(args),
    };

    match result {
        Ok(code) => std::process::exit(code),
        Err(e @ CliError::Input(_)) => {
            eprintln!("{e}");
            std::process::exit(EXIT_INPUT_ERROR);
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            std::process::exit(EXIT_CONFIG_ERROR);
        }
    }
}
