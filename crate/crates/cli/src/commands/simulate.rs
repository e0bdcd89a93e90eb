use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use riskcal_core::evaluation::{RiskFunction, SyntheticModel, guarantee_check};
use riskcal_core::model::{BoundMethod, RiskConfig};

use crate::CliError;
use crate::io::{RunManifest, write_json_doc};

use super::calibrate::parse_bound;
use super::resolve_seed;

/// Parses "linear", "logistic:slope=8,center=0.5", or
/// "step:low=0.05,high=0.6,cut=0.5".
pub fn parse_model(spec: &str) -> Result<SyntheticModel, CliError> {
    let (name, params) = match spec.split_once(':') {
        Some((name, params)) => (name, Some(params)),
        None => (spec, None),
    };
    let mut fields = std::collections::BTreeMap::new();
    if let Some(params) = params {
        for pair in params.split(',') {
            let Some((key, value)) = pair.split_once('=') else {
                return Err(CliError::Config(format!(
                    "model parameter '{pair}' is not key=value"
                )));
            };
            let value: f64 = value.parse().map_err(|_| {
                CliError::Config(format!("model parameter {key}='{value}' is not a number"))
            })?;
            fields.insert(key.trim().to_string(), value);
        }
    }
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| CliError::Config(format!("model '{name}' needs parameter {key}")))
    };
    let risk = match name {
        "linear" => RiskFunction::Linear,
        "logistic" => RiskFunction::Logistic { slope: get("slope")?, center: get("center")? },
        "step" => RiskFunction::Step { low: get("low")?, high: get("high")?, cut: get("cut")? },
        other => {
            return Err(CliError::Config(format!(
                "unknown model '{other}' (use linear, logistic, or step)"
            )));
        }
    };
    SyntheticModel::new(risk).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Synthetic model spec: linear | logistic:slope=S,center=C | step:low=A,high=B,cut=C
    #[arg(long)]
    pub model: String,
    /// Calibration-set size drawn per repeat
    #[arg(long, default_value_t = 1000)]
    pub cal_size: usize,
    /// Number of fresh-calibration repeats (at least 100)
    #[arg(long, default_value_t = 2000)]
    pub repeats: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Upper-bound construction: cp (exact) or hfd (Hoeffding)
    #[arg(long, default_value = "cp", value_parser = parse_bound)]
    pub bound: BoundMethod,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report document (JSON) is written here
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct SimulateDoc {
    model: String,
    violation_fraction: f64,
    violation_limit: f64,
    mean_true_tcfr: Option<f64>,
    thresholds_found: u64,
    repeats: u64,
    verdict: &'static str,
}

pub fn run(args: SimulateArgs) -> Result<i32, CliError> {
    let seed = resolve_seed(args.seed)?;
    let model = parse_model(&args.model)?;

    let mut config = RiskConfig::new(args.alpha);
    config.delta = args.delta;
    config.bound_method = args.bound;
    config.seed = seed;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let report = guarantee_check(&model, args.cal_size, args.repeats, &config)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // Monte Carlo tolerance: the violation rate of a valid procedure stays
    // within 3 standard errors of delta.
    let limit =
        args.delta + 3.0 * (args.delta * (1.0 - args.delta) / args.repeats as f64).sqrt();
    let verdict = if report.violation_fraction <= limit { "pass" } else { "fail" };

    let mut manifest = RunManifest::new(
        "simulate",
        json!({
            "model": args.model,
            "cal_size": args.cal_size,
            "repeats": args.repeats,
            "alpha": args.alpha,
            "delta": args.delta,
            "bound": args.bound.to_string(),
        }),
    )
    .with_seed(seed);
    manifest.skipped_lines = 0;

    let doc = SimulateDoc {
        model: args.model.clone(),
        violation_fraction: report.violation_fraction,
        violation_limit: limit,
        mean_true_tcfr: report.mean_true_tcfr,
        thresholds_found: report.thresholds_found,
        repeats: report.repeats,
        verdict,
    };
    write_json_doc(&args.output, &manifest, &doc)?;
    println!(
        "{verdict}: violation fraction {} (limit {}), mean true failure rate {} over {} threshold(s) -> {}",
        report.violation_fraction,
        limit,
        report
            .mean_true_tcfr
            .map_or_else(|| "n/a".to_string(), |v| v.to_string()),
        report.thresholds_found,
        args.output.display()
    );
    Ok(0)
}
