//! Shared domain types, their invariants, and the deterministic ordering
//! conventions used by every other module.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability vectors summing to one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("alpha {0} outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("delta {0} outside (0, 1)")]
    DeltaOutOfRange(f64),
    #[error("split ratio {0} outside (0, 1)")]
    SplitRatioOutOfRange(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("uncertainty {0} is not finite")]
    NonFiniteUncertainty(f64),
    #[error("admissible flag {0} is not 0 or 1")]
    BadAdmissibleFlag(u8),
}

/// One question's raw model evidence plus its binary admissibility label.
///
/// All evidence fields are optional; which ones a record needs depends on the
/// scoring method applied to it. Admissibility is an ingested label, never
/// computed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub id: String,
    /// 1 = the answer matches the ground truth, 0 = failure.
    pub admissible: u8,
    /// Probability vector over closed-ended options.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_probs: Option<Vec<f64>>,
    /// Black-box option samples (index per sampled response).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_option_ids: Option<Vec<u32>>,
    /// Semantic-cluster id per sampled open-domain response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_labels: Option<Vec<u32>>,
    /// Generative probability per sampled response, aligned with
    /// `cluster_labels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_probs: Option<Vec<f64>>,
    /// Pairwise response-similarity matrix (square, row-major).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precomputed_uncertainty: Option<f64>,
}

impl EvidenceRecord {
    pub fn new(id: impl Into<String>, admissible: u8) -> Self {
        Self {
            id: id.into(),
            admissible,
            option_probs: None,
            sampled_option_ids: None,
            cluster_labels: None,
            sequence_probs: None,
            similarity: None,
            precomputed_uncertainty: None,
        }
    }

    fn has_evidence(&self) -> bool {
        self.option_probs.is_some()
            || self.sampled_option_ids.is_some()
            || self.cluster_labels.is_some()
            || self.sequence_probs.is_some()
            || self.similarity.is_some()
            || self.precomputed_uncertainty.is_some()
    }
}

/// Checks every `EvidenceRecord` invariant, returning one human-readable
/// description per violation. An empty list means the record is valid.
pub fn validate_record(record: &EvidenceRecord) -> Vec<String> {
    let mut violations = Vec::new();

    if record.admissible > 1 {
        violations.push(format!(
            "admissible flag {} is not 0 or 1",
            record.admissible
        ));
    }
    if !record.has_evidence() {
        violations.push("record carries no evidence field and no precomputed_uncertainty".into());
    }

    if let Some(probs) = &record.option_probs {
        if probs.iter().any(|p| !p.is_finite()) {
            violations.push("option_probs contains a non-finite entry".into());
        } else {
            if let Some(neg) = probs.iter().find(|p| **p < 0.0) {
                violations.push(format!("option_probs entry {neg} is negative"));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                violations.push(format!("option_probs sum {sum} exceeds tolerance"));
            }
        }
    }

    if let Some(matrix) = &record.similarity {
        let n = matrix.len();
        if matrix.iter().any(|row| row.len() != n) {
            violations.push("similarity matrix is not square".into());
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            violations.push("similarity matrix contains a non-finite entry".into());
        }
    }

    if let Some(probs) = &record.sequence_probs {
        if let Some(labels) = &record.cluster_labels
            && labels.len() != probs.len()
        {
            violations.push(format!(
                "cluster_labels length {} != sequence_probs length {}",
                labels.len(),
                probs.len()
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p <= 0.0 || *p > 1.0) {
            violations.push("sequence_probs entries must lie in (0, 1]".into());
        }
    }

    if let Some(u) = record.precomputed_uncertainty
        && !u.is_finite()
    {
        violations.push(format!("precomputed_uncertainty {u} is not finite"));
    }

    violations
}

/// The unit of calibration and selection: an identifier, a scalar uncertainty
/// score, and the admissibility label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub uncertainty: f64,
    pub admissible: u8,
}

impl ScoredRecord {
    /// Builds a record, rejecting non-finite uncertainty and bad flags at
    /// ingestion. Negative zero is canonicalized so candidate grids stay
    /// strictly ascending.
    pub fn new(id: impl Into<String>, uncertainty: f64, admissible: u8) -> Result<Self, ModelError> {
        if !uncertainty.is_finite() {
            return Err(ModelError::NonFiniteUncertainty(uncertainty));
        }
        if admissible > 1 {
            return Err(ModelError::BadAdmissibleFlag(admissible));
        }
        Ok(Self {
            id: id.into(),
            uncertainty: uncertainty + 0.0,
            admissible,
        })
    }

    pub fn is_failure(&self) -> bool {
        self.admissible == 0
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.uncertainty.is_finite() {
            return Err(ModelError::NonFiniteUncertainty(self.uncertainty));
        }
        if self.admissible > 1 {
            return Err(ModelError::BadAdmissibleFlag(self.admissible));
        }
        Ok(())
    }
}

/// Strict total order on scored records: by uncertainty, ties broken by id.
pub fn record_order(a: &ScoredRecord, b: &ScoredRecord) -> Ordering {
    a.uncertainty
        .total_cmp(&b.uncertainty)
        .then_with(|| a.id.cmp(&b.id))
}

/// Sorts records into the canonical (uncertainty, id) order.
pub fn sort_records(records: &mut [ScoredRecord]) {
    records.sort_by(record_order);
}

/// Upper-confidence-bound construction used on the empirical failure rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundMethod {
    /// Exact one-sided Clopper-Pearson bound, inverted by bisection on the
    /// binomial CDF.
    #[serde(rename = "cp")]
    CpExact,
    /// Closed-form distribution-free Hoeffding bound.
    #[serde(rename = "hfd")]
    Hoeffding,
}

impl std::fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundMethod::CpExact => write!(f, "cp"),
            BoundMethod::Hoeffding => write!(f, "hfd"),
        }
    }
}

/// Parameters governing a calibration/evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    /// Target risk level on the conditional failure rate.
    pub alpha: f64,
    /// Significance level of the upper confidence bound.
    pub delta: f64,
    pub bound_method: BoundMethod,
    /// Fraction of each trial's records used for calibration.
    pub split_ratio: f64,
    pub n_trials: u32,
    pub seed: u64,
}

impl RiskConfig {
    /// Config with the given risk level and the stock defaults
    /// (delta 0.05, CP bound, split 0.5, 100 trials).
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            delta: 0.05,
            bound_method: BoundMethod::CpExact,
            split_ratio: 0.5,
            n_trials: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ModelError::AlphaOutOfRange(self.alpha));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ModelError::DeltaOutOfRange(self.delta));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(ModelError::SplitRatioOutOfRange(self.split_ratio));
        }
        if self.n_trials == 0 {
            return Err(ModelError::NoTrials);
        }
        Ok(())
    }
}

/// Per-candidate-threshold statistics: counts, empirical failure rate, and
/// the upper confidence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    /// Number of calibration records with uncertainty <= threshold.
    pub selected: u64,
    /// Failures among the selected records.
    pub failures: u64,
    /// failures / selected; the grid guarantees selected >= 1.
    pub rate: f64,
    pub upper: f64,
}

/// Bound statistics over the ascending candidate-threshold grid, tagged with
/// the confidence parameters they were computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub delta: f64,
    pub method: BoundMethod,
    pub points: Vec<CurvePoint>,
}

impl BoundCurve {
    /// Checks the structural invariants: thresholds strictly ascending,
    /// counters non-decreasing, failures <= selected, rate and upper
    /// consistent.
    pub fn validate(&self) -> Result<(), String> {
        let mut prev_t = f64::NEG_INFINITY;
        let mut prev_selected = 0u64;
        let mut prev_failures = 0u64;
        for p in &self.points {
            if p.threshold <= prev_t {
                return Err(format!("thresholds not strictly ascending at {}", p.threshold));
            }
            if p.selected < prev_selected || p.failures < prev_failures {
                return Err("curve counters decreased".into());
            }
            if p.failures > p.selected {
                return Err("failures exceed selected".into());
            }
            if p.selected == 0 {
                return Err("curve entry with zero selected records".into());
            }
            let rate = p.failures as f64 / p.selected as f64;
            if (p.rate - rate).abs() > 1e-12 {
                return Err(format!("rate {} inconsistent with counts", p.rate));
            }
            if p.upper < p.rate - 1e-12 {
                return Err(format!("upper {} below empirical rate {}", p.upper, p.rate));
            }
            prev_t = p.threshold;
            prev_selected = p.selected;
            prev_failures = p.failures;
        }
        Ok(())
    }
}

/// Result of calibrating a threshold on one record set.
///
/// The threshold is the largest curve entry whose upper bound clears alpha;
/// absent means no candidate could be certified and the policy abstains on
/// everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub threshold: Option<f64>,
    pub bound_at_threshold: Option<f64>,
    pub selected_count_cal: u64,
    pub config: RiskConfig,
    pub curve: BoundCurve,
}

/// One randomized split's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u32,
    pub threshold: Option<f64>,
    /// Failure fraction among selected test records; absent when the
    /// selection is empty.
    pub test_fdr: Option<f64>,
    /// Admissible-retention fraction, zeroed when the trial's test FDR
    /// exceeds alpha.
    pub power: f64,
    pub n_selected: u64,
}

/// Aggregate FDR/power/threshold statistics across randomized splits.
///
/// Trials with an empty selection have no FDR; they are excluded from the
/// mean/std and counted as non-violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub alpha: f64,
    pub per_trial: Vec<TrialOutcome>,
    pub mean_fdr: Option<f64>,
    pub std_fdr: Option<f64>,
    pub mean_power: f64,
    /// Fraction of trials whose (defined) test FDR exceeded alpha.
    pub violation_fraction: f64,
}
