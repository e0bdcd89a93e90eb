//! Risk-calibrated selective prediction.
//!
//! The pipeline turns raw model evidence into scalar uncertainty scores,
//! calibrates the largest uncertainty threshold whose conditional failure
//! rate is certified below a user risk level with high confidence, and
//! evaluates the FDR and power of the resulting selection policy over
//! randomized trials. A conformal-p-value + Benjamini-Hochberg baseline and
//! a synthetic generator with an analytic failure-rate oracle round out the
//! toolkit.

pub mod baseline;
pub mod bounds;
pub mod calibration;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod scorers;

pub use model::{
    BoundCurve, BoundMethod, CalibrationOutcome, CurvePoint, EvidenceRecord, RiskConfig,
    ScoredRecord, TrialOutcome, TrialReport,
};
