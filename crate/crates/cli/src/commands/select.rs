use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use riskcal_core::evaluation::{apply_threshold, test_fdr};

use crate::CliError;
use crate::io::{RunManifest, write_jsonl};

use super::read_scored;

#[derive(Args)]
pub struct SelectArgs {
    /// Calibration document produced by `riskcal calibrate`
    #[arg(long)]
    pub calibration: PathBuf,
    /// Scored records to filter, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Selected records are written here, one JSON object per line
    #[arg(long)]
    pub output: PathBuf,
    /// Abort (exit 3) if any input line had to be skipped
    #[arg(long)]
    pub strict: bool,
}

pub fn run(args: SelectArgs) -> Result<i32, CliError> {
    let doc_text = std::fs::read_to_string(&args.calibration)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.calibration.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&doc_text).map_err(|e| {
        CliError::Input(format!("{} is not a JSON document: {e}", args.calibration.display()))
    })?;
    let threshold = match doc.get("threshold") {
        Some(serde_json::Value::Null) => None,
        Some(value) => Some(value.as_f64().ok_or_else(|| {
            CliError::Input(format!(
                "{}: threshold field is not a number",
                args.calibration.display()
            ))
        })?),
        None => {
            return Err(CliError::Input(format!(
                "{} carries no threshold field",
                args.calibration.display()
            )));
        }
    };
    if threshold.is_none() {
        eprintln!(
            "warning: {} holds no valid threshold; selecting nothing",
            args.calibration.display()
        );
    }

    let input = read_scored(&args.input, args.strict)?;
    let selected = apply_threshold(&input.records, threshold);
    let fdr = test_fdr(&selected);
    let admissible_total = input.records.iter().filter(|r| !r.is_failure()).count();
    let raw_power = (admissible_total > 0).then(|| {
        selected.iter().filter(|r| !r.is_failure()).count() as f64 / admissible_total as f64
    });

    let summary = json!({
        "threshold": threshold,
        "n_selected": selected.len(),
        "n_input": input.records.len(),
        "test_fdr": fdr,
        "raw_power": raw_power,
    });
    let mut manifest = RunManifest::new("select", json!({ "strict": args.strict }));
    manifest.add_input(&args.calibration)?;
    manifest.add_input(&args.input)?;
    manifest.skipped_lines = input.skipped.len() as u64;

    let owned: Vec<_> = selected.into_iter().cloned().collect();
    write_jsonl(&args.output, &manifest, Some(summary), &owned)?;
    println!(
        "selected {} of {} record(s) -> {}",
        owned.len(),
        input.records.len(),
        args.output.display()
    );
    Ok(0)
}
