use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use riskcal_core::evaluation::run_trials_grid;
use riskcal_core::model::{BoundMethod, RiskConfig, TrialReport};

use crate::CliError;
use crate::fmt::{opt_sig6, sig6};
use crate::io::{RunManifest, companion_json_path, write_csv, write_json_doc};

use super::calibrate::parse_bound;
use super::{parse_alphas, read_scored, resolve_seed};

pub const CSV_HEADER: &str = "alpha,mean_fdr,std_fdr,mean_power,violation_fraction,mean_threshold";

#[derive(Args)]
pub struct EvaluateArgs {
    /// Scored records, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Risk levels as start:stop:step (start inclusive, stop exclusive)
    #[arg(long, default_value = "0.05:0.26:0.01")]
    pub alphas: String,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Upper-bound construction: cp (exact) or hfd (Hoeffding)
    #[arg(long, default_value = "cp", value_parser = parse_bound)]
    pub bound: BoundMethod,
    /// Number of randomized calibration/test splits
    #[arg(long, default_value_t = 100)]
    pub trials: u32,
    /// Calibration fraction of each split
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV table is written here; a full JSON document lands beside it
    #[arg(long)]
    pub output: PathBuf,
    /// Abort (exit 3) if any input line had to be skipped
    #[arg(long)]
    pub strict: bool,
}

pub fn mean_threshold(report: &TrialReport) -> Option<f64> {
    let thresholds: Vec<f64> = report.per_trial.iter().filter_map(|t| t.threshold).collect();
    if thresholds.is_empty() {
        None
    } else {
        Some(thresholds.iter().sum::<f64>() / thresholds.len() as f64)
    }
}

pub fn csv_row(report: &TrialReport) -> String {
    format!(
        "{},{},{},{},{},{}",
        sig6(report.alpha),
        opt_sig6(report.mean_fdr),
        opt_sig6(report.std_fdr),
        sig6(report.mean_power),
        sig6(report.violation_fraction),
        opt_sig6(mean_threshold(report)),
    )
}

#[derive(Serialize)]
struct EvaluateDoc {
    reports: Vec<TrialReport>,
}

pub fn run(args: EvaluateArgs) -> Result<i32, CliError> {
    let seed = resolve_seed(args.seed)?;
    let alphas = parse_alphas(&args.alphas)?;
    let input = read_scored(&args.input, args.strict)?;

    let mut config = RiskConfig::new(alphas[0]);
    config.delta = args.delta;
    config.bound_method = args.bound;
    config.split_ratio = args.split;
    config.n_trials = args.trials;
    config.seed = seed;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let reports = run_trials_grid(&input.records, &config, &alphas)
        .map_err(|e| CliError::Input(e.to_string()))?;

    let mut manifest = RunManifest::new(
        "evaluate",
        json!({
            "alphas": args.alphas,
            "delta": args.delta,
            "bound": args.bound.to_string(),
            "trials": args.trials,
            "split": args.split,
            "strict": args.strict,
        }),
    )
    .with_seed(seed);
    manifest.add_input(&args.input)?;
    manifest.skipped_lines = input.skipped.len() as u64;

    let rows: Vec<String> = reports.iter().map(csv_row).collect();
    write_csv(&args.output, &manifest, CSV_HEADER, &rows)?;
    let doc_path = companion_json_path(&args.output);
    write_json_doc(&doc_path, &manifest, &EvaluateDoc { reports })?;

    println!(
        "evaluated {} risk level(s) x {} trial(s) on {} record(s) -> {} (+ {})",
        alphas.len(),
        args.trials,
        input.records.len(),
        args.output.display(),
        doc_path.display()
    );
    Ok(0)
}
