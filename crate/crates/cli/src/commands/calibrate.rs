use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use riskcal_core::calibration;
use riskcal_core::model::{BoundMethod, RiskConfig};

use crate::io::{RunManifest, write_json_doc};
use crate::{CliError, EXIT_NO_THRESHOLD};

use super::{read_scored, resolve_seed};

pub fn parse_bound(text: &str) -> Result<BoundMethod, String> {
    match text {
        "cp" => Ok(BoundMethod::CpExact),
        "hfd" => Ok(BoundMethod::Hoeffding),
        other => Err(format!("unknown bound method '{other}' (use cp or hfd)")),
    }
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Scored records, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Target risk level on the conditional failure rate
    #[arg(long)]
    pub alpha: f64,
    /// Significance level of the upper confidence bound
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Upper-bound construction: cp (exact) or hfd (Hoeffding)
    #[arg(long, default_value = "cp", value_parser = parse_bound)]
    pub bound: BoundMethod,
    /// Calibration document (JSON) is written here
    #[arg(long)]
    pub output: PathBuf,
    /// Abort (exit 3) if any input line had to be skipped
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: CalibrateArgs) -> Result<i32, CliError> {
    let seed = resolve_seed(args.seed)?;
    let input = read_scored(&args.input, args.strict)?;

    let mut config = RiskConfig::new(args.alpha);
    config.delta = args.delta;
    config.bound_method = args.bound;
    config.seed = seed;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let outcome = calibration::calibrate(&input.records, &config)
        .map_err(|e| CliError::Input(e.to_string()))?;

    let mut manifest = RunManifest::new(
        "calibrate",
        json!({
            "alpha": args.alpha,
            "delta": args.delta,
            "bound": args.bound.to_string(),
            "strict": args.strict,
        }),
    )
    .with_seed(seed);
    manifest.add_input(&args.input)?;
    manifest.skipped_lines = input.skipped.len() as u64;
    write_json_doc(&args.output, &manifest, &outcome)?;

    match outcome.threshold {
        Some(t) => {
            println!(
                "threshold {t} (bound {}, {} of {} calibration records selected) -> {}",
                outcome.bound_at_threshold.unwrap_or(f64::NAN),
                outcome.selected_count_cal,
                input.records.len(),
                args.output.display()
            );
            Ok(0)
        }
        None => {
            eprintln!(
                "no threshold satisfies alpha {} at delta {}; selection must abstain",
                args.alpha, args.delta
            );
            Ok(EXIT_NO_THRESHOLD)
        }
    }
}
