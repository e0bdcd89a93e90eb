use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use riskcal_core::baseline::ca_trials_grid;
use riskcal_core::evaluation::{run_trials_grid, trial_split};
use riskcal_core::model::{BoundMethod, RiskConfig};

use crate::CliError;
use crate::fmt::{opt_sig6, sig6};
use crate::io::{RunManifest, companion_json_path, write_csv, write_json_doc};

use super::calibrate::parse_bound;
use super::{parse_alphas, read_scored, resolve_seed};

pub const CSV_HEADER: &str = "alpha,coin_power,ca_power,coin_fdr,ca_fdr";

#[derive(Args)]
pub struct BaselineArgs {
    /// Scored records, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Risk levels as start:stop:step (start inclusive, stop exclusive)
    #[arg(long, default_value = "0.05:0.26:0.01")]
    pub alphas: String,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Upper-bound construction for the threshold policy
    #[arg(long, default_value = "cp", value_parser = parse_bound)]
    pub bound: BoundMethod,
    #[arg(long, default_value_t = 100)]
    pub trials: u32,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Side-by-side CSV is written here; a JSON document lands beside it
    #[arg(long)]
    pub output: PathBuf,
    /// Abort (exit 3) if any input line had to be skipped
    #[arg(long)]
    pub strict: bool,
}

#[derive(Serialize)]
struct BaselineRow {
    alpha: f64,
    coin_power: f64,
    ca_power: f64,
    coin_fdr: Option<f64>,
    ca_fdr: Option<f64>,
}

#[derive(Serialize)]
struct BaselineDoc {
    rows: Vec<BaselineRow>,
}

pub fn run(args: BaselineArgs) -> Result<i32, CliError> {
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

    // Threshold-policy side over shared splits.
    let coin_reports = run_trials_grid(&input.records, &config, &alphas)
        .map_err(|e| CliError::Input(e.to_string()))?;

    // Baseline side over the identical per-trial splits.
    let mut ca_power_sums = vec![0.0f64; alphas.len()];
    let mut ca_fdr_sums = vec![0.0f64; alphas.len()];
    let mut ca_fdr_counts = vec![0u64; alphas.len()];
    for trial in 0..config.n_trials {
        let (cal, test) = trial_split(&input.records, &config, trial)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let trials = ca_trials_grid(&cal, &test, &alphas)
            .map_err(|e| CliError::Input(e.to_string()))?;
        for (idx, outcome) in trials.iter().enumerate() {
            ca_power_sums[idx] += outcome.power;
            if let Some(fdr) = outcome.fdr {
                ca_fdr_sums[idx] += fdr;
                ca_fdr_counts[idx] += 1;
            }
        }
    }

    let rows: Vec<BaselineRow> = alphas
        .iter()
        .enumerate()
        .map(|(idx, &alpha)| BaselineRow {
            alpha,
            coin_power: coin_reports[idx].mean_power,
            ca_power: ca_power_sums[idx] / config.n_trials as f64,
            coin_fdr: coin_reports[idx].mean_fdr,
            ca_fdr: (ca_fdr_counts[idx] > 0)
                .then(|| ca_fdr_sums[idx] / ca_fdr_counts[idx] as f64),
        })
        .collect();

    let mut manifest = RunManifest::new(
        "baseline",
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

    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                sig6(r.alpha),
                sig6(r.coin_power),
                sig6(r.ca_power),
                opt_sig6(r.coin_fdr),
                opt_sig6(r.ca_fdr),
            )
        })
        .collect();
    write_csv(&args.output, &manifest, CSV_HEADER, &csv_rows)?;
    let doc_path = companion_json_path(&args.output);
    write_json_doc(&doc_path, &manifest, &BaselineDoc { rows })?;

    println!(
        "compared threshold policy vs conformal baseline at {} risk level(s) -> {} (+ {})",
        alphas.len(),
        args.output.display(),
        doc_path.display()
    );
    Ok(0)
}
