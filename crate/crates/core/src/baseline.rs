//! Score-based conformal selection baseline: conformal p-values computed
//! against the inadmissible calibration records, thresholded by the
//! Benjamini-Hochberg step-up rule.
//!
//! The alignment score is the negated uncertainty, so a test record's
//! p-value counts the inadmissible calibration records that look at least as
//! trustworthy as it does. Counting is deterministic and conservative; no
//! tie randomization.

use crate::evaluation::{EvalError, power, test_fdr};
use crate::model::ScoredRecord;

/// Conformal p-values aligned with the test record order; each lies in
/// (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSet {
    pub values: Vec<f64>,
}

impl PValueSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// p_j = (1 + #{inadmissible cal i : u_i <= u_j}) / (1 + #inadmissible cal).
///
/// With no inadmissible calibration record every p-value is 1. The
/// inadmissible scores are sorted once and counted by binary search, which
/// preserves exact counts.
pub fn conformal_pvalues(cal: &[ScoredRecord], test: &[ScoredRecord]) -> PValueSet {
    let mut null_scores: Vec<f64> = cal
        .iter()
        .filter(|r| r.is_failure())
        .map(|r| r.uncertainty)
        .collect();
    null_scores.sort_by(f64::total_cmp);
    let denominator = (1 + null_scores.len()) as f64;
    let values = test
        .iter()
        .map(|r| {
            let count = null_scores.partition_point(|&u| u <= r.uncertainty);
            (1 + count) as f64 / denominator
        })
        .collect();
    PValueSet { values }
}

/// Benjamini-Hochberg step-up selection: with p-values sorted ascending,
/// k* = max{k : p_(k) <= k alpha / n}, select everything at or below the
/// induced cutoff. Ties share fate. Returns the selected test indices,
/// ascending.
pub fn bh_select(pvalues: &PValueSet, alpha: f64) -> Vec<usize> {
    let n = pvalues.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = pvalues.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut k_star = 0usize;
    for (i, p) in sorted.iter().enumerate() {
        if *p <= (i + 1) as f64 * alpha / n as f64 {
            k_star = i + 1;
        }
    }
    if k_star == 0 {
        return Vec::new();
    }
    let cutoff = k_star as f64 * alpha / n as f64;
    (0..n).filter(|&j| pvalues.values[j] <= cutoff).collect()
}

/// One baseline trial's FDR and power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineTrial {
    /// Failure fraction among BH-selected test records; absent when the
    /// selection is empty.
    pub fdr: Option<f64>,
    /// Power with the same zeroing rule as the threshold policy.
    pub power: f64,
    pub n_selected: u64,
}

/// Computes p-values against the calibration set, applies BH at alpha, and
/// evaluates FDR/power on the selected test records.
pub fn ca_trial(
    cal: &[ScoredRecord],
    test: &[ScoredRecord],
    alpha: f64,
) -> Result<BaselineTrial, EvalError> {
    let mut trials = ca_trials_grid(cal, test, &[alpha])?;
    Ok(trials.pop().expect("one alpha in, one trial out"))
}

/// Runs the baseline over several alphas, computing the p-values once; the
/// p-value construction does not depend on alpha.
pub fn ca_trials_grid(
    cal: &[ScoredRecord],
    test: &[ScoredRecord],
    alphas: &[f64],
) -> Result<Vec<BaselineTrial>, EvalError> {
    let pvalues = conformal_pvalues(cal, test);
    alphas
        .iter()
        .map(|&alpha| {
            let indices = bh_select(&pvalues, alpha);
            let selected: Vec<&ScoredRecord> = indices.iter().map(|&j| &test[j]).collect();
            let fdr = test_fdr(&selected);
            let power = power(&selected, test, alpha)?;
            Ok(BaselineTrial { fdr, power, n_selected: selected.len() as u64 })
        })
        .collect()
}
