pub mod baseline;
pub mod calibrate;
pub mod evaluate;
pub mod score;
pub mod select;
pub mod simulate;

use std::path::Path;

use riskcal_core::ScoredRecord;

use crate::io::{JsonlRead, LineIssue, read_jsonl};
use crate::{CliError, DEFAULT_SEED, SEED_ENV_VAR};

/// Explicit flag beats the environment override beats the fixed default.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("{SEED_ENV_VAR}={text} is not a 64-bit seed"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Parses "start:stop:step" into risk levels: start inclusive, stop
/// exclusive.
pub fn parse_alphas(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(CliError::Config(format!(
            "alpha range '{spec}' is not of the form start:stop:step"
        )));
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Config(format!("alpha range part '{s}' is not a number")))
    };
    let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
    let well_formed = step > 0.0 && start < stop;
    if !well_formed {
        return Err(CliError::Config(format!(
            "alpha range '{spec}' needs start < stop and step > 0"
        )));
    }
    let mut alphas = Vec::new();
    let mut i = 0u32;
    loop {
        let alpha = start + f64::from(i) * step;
        if alpha >= stop - 1e-12 {
            break;
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Config(format!("alpha {alpha} outside (0, 1)")));
        }
        alphas.push(alpha);
        i += 1;
    }
    if alphas.is_empty() {
        return Err(CliError::Config(format!("alpha range '{spec}' is empty")));
    }
    Ok(alphas)
}

pub struct ScoredInput {
    pub records: Vec<ScoredRecord>,
    pub skipped: Vec<LineIssue>,
}

/// Reads scored records, validating each; invalid lines are skipped (or, in
/// strict mode, fail the run). An input with no usable record is an error.
pub fn read_scored(path: &Path, strict: bool) -> Result<ScoredInput, CliError> {
    let JsonlRead { records, mut skipped } = read_jsonl::<ScoredRecord>(path)?;
    let mut valid = Vec::with_capacity(records.len());
    for (line, record) in records {
        match record.validate() {
            Ok(()) => valid.push(record),
            Err(e) => skipped.push(LineIssue {
                line,
                message: format!("record '{}': {e}", record.id),
            }),
        }
    }
    skipped.sort_by_key(|issue| issue.line);
    report_skipped(path, &skipped, strict)?;
    if valid.is_empty() {
        return Err(CliError::Input(format!(
            "{} contains no usable scored records",
            path.display()
        )));
    }
    Ok(ScoredInput { records: valid, skipped })
}

/// Warns about skipped lines; in strict mode any skip aborts the run.
pub fn report_skipped(path: &Path, skipped: &[LineIssue], strict: bool) -> Result<(), CliError> {
    for issue in skipped {
        eprintln!("warning: {}: skipped {issue}", path.display());
    }
    if strict && !skipped.is_empty() {
        return Err(CliError::Input(format!(
            "{}: {} line(s) skipped in strict mode",
            path.display(),
            skipped.len()
        )));
    }
    Ok(())
}
