//! Threshold calibration: empirical failure analysis over candidate
//! thresholds, upper-bound curve construction, and largest-valid-threshold
//! selection.
//!
//! Candidate thresholds are the distinct observed uncertainty values; the
//! selected set, and hence the bound, is constant between them. Selection
//! returns the largest candidate whose upper confidence bound clears alpha.
//! The bound curve is near-monotone once the selected count outgrows the
//! small-sample slack; entries at the bottom of the grid, where even a
//! zero-failure bound cannot clear alpha, are provably invalid and never
//! veto larger thresholds.

use thiserror::Error;

use crate::bounds::{BoundError, BoundInput, upper_bound};
use crate::model::{
    BoundCurve, BoundMethod, CalibrationOutcome, CurvePoint, ModelError, RiskConfig, ScoredRecord,
};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("no calibration records")]
    EmptyRecords,
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Config(#[from] ModelError),
}

/// Strictly ascending candidate thresholds: the distinct uncertainty values
/// observed in the calibration records.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    pub thresholds: Vec<f64>,
}

impl CandidateGrid {
    pub fn from_records(records: &[ScoredRecord]) -> Self {
        let mut thresholds: Vec<f64> = records.iter().map(|r| r.uncertainty + 0.0).collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        Self { thresholds }
    }
}

/// Selected/failure counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionStats {
    pub selected: u64,
    pub failures: u64,
    /// failures / selected; absent when nothing is selected.
    pub rate: Option<f64>,
}

/// Counts records with uncertainty <= threshold and the failures among them.
pub fn selection_stats(records: &[ScoredRecord], threshold: f64) -> SelectionStats {
    let mut selected = 0u64;
    let mut failures = 0u64;
    for r in records {
        if r.uncertainty <= threshold {
            selected += 1;
            if r.is_failure() {
                failures += 1;
            }
        }
    }
    let rate = (selected > 0).then(|| failures as f64 / selected as f64);
    SelectionStats { selected, failures, rate }
}

/// (uncertainty, failed) pairs sorted ascending by uncertainty; the shared
/// input of the sweep routines.
fn sorted_outcomes(records: &[ScoredRecord]) -> Vec<(f64, bool)> {
    let mut outcomes: Vec<(f64, bool)> =
        records.iter().map(|r| (r.uncertainty + 0.0, r.is_failure())).collect();
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
    outcomes
}

/// One bound-curve entry per candidate threshold, computed in a single
/// ascending sweep with running counters.
pub fn build_curve(
    records: &[ScoredRecord],
    delta: f64,
    method: BoundMethod,
) -> Result<BoundCurve, CalibrationError> {
    if records.is_empty() {
        return Err(CalibrationError::EmptyRecords);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CalibrationError::Bound(BoundError::DeltaOutOfRange(delta)));
    }
    let outcomes = sorted_outcomes(records);

    let mut points = Vec::new();
    let mut selected = 0u64;
    let mut failures = 0u64;
    let mut i = 0;
    while i < outcomes.len() {
        let threshold = outcomes[i].0;
        while i < outcomes.len() && outcomes[i].0 == threshold {
            selected += 1;
            if outcomes[i].1 {
                failures += 1;
            }
            i += 1;
        }
        let upper = upper_bound(BoundInput::new(failures, selected, delta)?, method)?;
        points.push(CurvePoint {
            threshold,
            selected,
            failures,
            rate: failures as f64 / selected as f64,
            upper,
        });
    }
    Ok(BoundCurve { delta, method, points })
}

/// Smallest selected-count at which a zero-failure bound can fall under
/// alpha, or `None` when even `max_trials` records cannot certify that risk
/// level. Both bound constructions are monotone decreasing in the trial
/// count at zero failures, so binary search applies.
pub fn support_floor(
    method: BoundMethod,
    delta: f64,
    alpha: f64,
    max_trials: u64,
) -> Result<Option<u64>, BoundError> {
    if max_trials == 0 {
        return Ok(None);
    }
    let bound_at = |m: u64| upper_bound(BoundInput::new(0, m, delta)?, method);
    if bound_at(max_trials)? > alpha {
        return Ok(None);
    }
    let mut lo = 1u64;
    let mut hi = max_trials;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if bound_at(mid)? <= alpha {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

/// Largest candidate threshold whose upper bound is at or below alpha;
/// `None` when no candidate qualifies.
pub fn select_threshold(curve: &BoundCurve, alpha: f64) -> Option<f64> {
    curve
        .points
        .iter()
        .rev()
        .find(|point| point.upper <= alpha)
        .map(|point| point.threshold)
}

/// Composes curve construction and threshold selection under one config.
pub fn calibrate(
    records: &[ScoredRecord],
    config: &RiskConfig,
) -> Result<CalibrationOutcome, CalibrationError> {
    config.validate()?;
    let curve = build_curve(records, config.delta, config.bound_method)?;
    let threshold = select_threshold(&curve, config.alpha);
    let (selected_count_cal, bound_at_threshold) = match threshold {
        Some(t) => {
            let point = curve
                .points
                .iter()
                .rev()
                .find(|p| p.threshold <= t)
                .expect("selected threshold comes from the curve");
            (point.selected, Some(point.upper))
        }
        None => (0, None),
    };
    Ok(CalibrationOutcome {
        threshold,
        bound_at_threshold,
        selected_count_cal,
        config: *config,
        curve,
    })
}

/// Threshold pick for one alpha out of a shared sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SweepPick {
    pub threshold: Option<f64>,
    pub selected: u64,
    pub bound: Option<f64>,
}

/// Selects thresholds for several alphas in one ascending pass, evaluating
/// each candidate's bound at most once. Produces exactly the thresholds
/// `select_threshold` would on the full curve, without materializing it:
/// candidates that provably cannot clear the largest alpha (too little
/// support for even a zero-failure bound, or an empirical rate already
/// above it) are skipped without a bound evaluation.
pub(crate) fn sweep_select(
    records: &[ScoredRecord],
    delta: f64,
    method: BoundMethod,
    alphas: &[f64],
) -> Result<Vec<SweepPick>, CalibrationError> {
    if records.is_empty() {
        return Err(CalibrationError::EmptyRecords);
    }
    let outcomes = sorted_outcomes(records);
    let total = outcomes.len() as u64;

    let mut picks = vec![SweepPick { threshold: None, selected: 0, bound: None }; alphas.len()];
    let alpha_max = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let Some(floor) = support_floor(method, delta, alpha_max, total)? else {
        return Ok(picks);
    };

    let mut selected = 0u64;
    let mut failures = 0u64;
    let mut i = 0;
    while i < outcomes.len() {
        let threshold = outcomes[i].0;
        while i < outcomes.len() && outcomes[i].0 == threshold {
            selected += 1;
            if outcomes[i].1 {
                failures += 1;
            }
            i += 1;
        }
        // Both bound constructions dominate the zero-failure bound and the
        // empirical rate, so these candidates cannot clear any alpha.
        if selected < floor || failures as f64 > alpha_max * selected as f64 {
            continue;
        }
        let upper = upper_bound(BoundInput::new(failures, selected, delta)?, method)?;
        for (idx, &alpha) in alphas.iter().enumerate() {
            if upper <= alpha {
                picks[idx] = SweepPick {
                    threshold: Some(threshold),
                    selected,
                    bound: Some(upper),
                };
            }
        }
    }
    Ok(picks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, uncertainty: f64, admissible: u8) -> ScoredRecord {
        ScoredRecord::new(id, uncertainty, admissible).unwrap()
    }

    fn three_records() -> Vec<ScoredRecord> {
        vec![
            record("a", 0.1, 1),
            record("b", 0.2, 0),
            record("c", 0.9, 1),
        ]
    }

    /// Curve with the given uppers at thresholds 1, 2, 3, ... and support
    /// well above any floor.
    fn synthetic_curve(uppers: &[f64], thresholds: &[f64]) -> BoundCurve {
        let points = uppers
            .iter()
            .zip(thresholds)
            .enumerate()
            .map(|(i, (&upper, &threshold))| CurvePoint {
                threshold,
                selected: 10_000 + i as u64,
                failures: 0,
                rate: 0.0,
                upper,
            })
            .collect();
        BoundCurve { delta: 0.05, method: BoundMethod::CpExact, points }
    }

    #[test]
    fn selection_stats_counts_directly() {
        let records = three_records();
        let s = selection_stats(&records, 0.5);
        assert_eq!((s.selected, s.failures, s.rate), (2, 1, Some(0.5)));

        let s = selection_stats(&records, 0.05);
        assert_eq!((s.selected, s.failures, s.rate), (0, 0, None));

        let s = selection_stats(&records, 1.0);
        assert_eq!(s.selected, 3);
        assert_eq!(s.failures, 1);
        assert!((s.rate.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_is_sorted_distinct_values() {
        let records = vec![
            record("a", 0.5, 1),
            record("b", 0.1, 1),
            record("c", 0.5, 0),
        ];
        let grid = CandidateGrid::from_records(&records);
        assert_eq!(grid.thresholds, vec![0.1, 0.5]);
    }

    #[test]
    fn curve_for_single_failing_record() {
        let curve = build_curve(&[record("a", 0.4, 0)], 0.05, BoundMethod::CpExact).unwrap();
        assert_eq!(curve.points.len(), 1);
        let p = curve.points[0];
        assert_eq!((p.threshold, p.selected, p.failures, p.rate, p.upper), (0.4, 1, 1, 1.0, 1.0));
        curve.validate().unwrap();
    }

    #[test]
    fn curve_for_single_admissible_record() {
        let curve = build_curve(&[record("a", 0.4, 1)], 0.05, BoundMethod::CpExact).unwrap();
        assert!((curve.points[0].upper - 0.95).abs() < 1e-9);
    }

    #[test]
    fn curve_for_two_admissible_records() {
        let records = vec![record("a", 0.1, 1), record("b", 0.2, 1)];
        let curve = build_curve(&records, 0.05, BoundMethod::CpExact).unwrap();
        assert_eq!(curve.points.len(), 2);
        assert!((curve.points[0].upper - 0.95).abs() < 1e-9);
        let expected = 1.0 - 0.05f64.powf(0.5);
        assert!((curve.points[1].upper - expected).abs() < 1e-9);
        curve.validate().unwrap();
    }

    #[test]
    fn curve_rejects_empty_input() {
        assert!(matches!(
            build_curve(&[], 0.05, BoundMethod::CpExact),
            Err(CalibrationError::EmptyRecords)
        ));
    }

    #[test]
    fn select_takes_the_largest_valid_entry() {
        let curve = synthetic_curve(&[0.04, 0.08, 0.12], &[0.2, 0.5, 0.9]);
        assert_eq!(select_threshold(&curve, 0.1), Some(0.5));
    }

    #[test]
    fn select_is_absent_when_no_entry_qualifies() {
        let curve = synthetic_curve(&[0.15, 0.2, 0.3], &[0.2, 0.5, 0.9]);
        assert_eq!(select_threshold(&curve, 0.1), None);
    }

    #[test]
    fn small_sample_violations_do_not_veto_later_entries() {
        // Early entries carry too little support for their bound to clear
        // alpha; the certificate at the largest valid entry is what counts.
        let curve = synthetic_curve(&[0.15, 0.05], &[0.2, 0.5]);
        assert_eq!(select_threshold(&curve, 0.1), Some(0.5));

        let curve = synthetic_curve(&[0.05, 0.12, 0.09], &[0.2, 0.5, 0.9]);
        assert_eq!(select_threshold(&curve, 0.1), Some(0.9));
    }

    #[test]
    fn select_on_a_zero_failure_curve_takes_the_top() {
        // cp_upper(0, m, 0.05) <= 0.1 first holds at m = 29; smaller support
        // cannot certify alpha = 0.1 no matter the outcome.
        let mut points = Vec::new();
        for m in 1..=100u64 {
            points.push(CurvePoint {
                threshold: m as f64,
                selected: m,
                failures: 0,
                rate: 0.0,
                upper: crate::bounds::clopper_pearson_upper(0, m, 0.05).unwrap(),
            });
        }
        let curve = BoundCurve { delta: 0.05, method: BoundMethod::CpExact, points };
        assert_eq!(select_threshold(&curve, 0.1), Some(100.0));
    }

    #[test]
    fn support_floor_matches_zero_failure_bound() {
        let floor = support_floor(BoundMethod::CpExact, 0.05, 0.1, 10_000)
            .unwrap()
            .unwrap();
        assert_eq!(floor, 29);
        let at = crate::bounds::clopper_pearson_upper(0, floor, 0.05).unwrap();
        let below = crate::bounds::clopper_pearson_upper(0, floor - 1, 0.05).unwrap();
        assert!(at <= 0.1 && below > 0.1);

        // Hoeffding needs ln(1/delta) / (2 alpha^2) records.
        let floor = support_floor(BoundMethod::Hoeffding, 0.05, 0.1, 10_000)
            .unwrap()
            .unwrap();
        assert_eq!(floor, (20.0f64.ln() / 0.02).ceil() as u64);

        // Not certifiable at this support no matter the outcome.
        assert_eq!(support_floor(BoundMethod::CpExact, 0.05, 0.1, 5).unwrap(), None);
    }

    #[test]
    fn exact_threshold_dominates_hoeffding_threshold_on_any_curve() {
        // The exact bound never exceeds the concentration bound, so its
        // valid candidate set is a superset and its maximum at least as
        // large.
        let mut records = Vec::new();
        let mut state = 0x9E3779B97F4A7C15u64;
        for i in 0..300 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let fail = ((state >> 11) as f64 / (1u64 << 53) as f64) < u;
            records.push(record(&format!("r{i:04}"), u, u8::from(!fail)));
        }
        for alpha in [0.1, 0.2, 0.3] {
            let cp = select_threshold(
                &build_curve(&records, 0.05, BoundMethod::CpExact).unwrap(),
                alpha,
            );
            let hfd = select_threshold(
                &build_curve(&records, 0.05, BoundMethod::Hoeffding).unwrap(),
                alpha,
            );
            assert!(
                cp.unwrap_or(f64::NEG_INFINITY) >= hfd.unwrap_or(f64::NEG_INFINITY),
                "alpha {alpha}: {cp:?} < {hfd:?}"
            );
        }
    }

    #[test]
    fn calibrate_all_admissible_selects_max_uncertainty() {
        let records: Vec<ScoredRecord> = (0..100)
            .map(|i| record(&format!("r{i:03}"), i as f64 / 100.0, 1))
            .collect();
        let outcome = calibrate(&records, &RiskConfig::new(0.1)).unwrap();
        assert_eq!(outcome.threshold, Some(0.99));
        assert_eq!(outcome.selected_count_cal, 100);
        let expected = 1.0 - 0.05f64.powf(0.01);
        assert!((outcome.bound_at_threshold.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn calibrate_all_failures_abstains() {
        let records: Vec<ScoredRecord> = (0..100)
            .map(|i| record(&format!("r{i:03}"), i as f64 / 100.0, 0))
            .collect();
        let outcome = calibrate(&records, &RiskConfig::new(0.1)).unwrap();
        assert_eq!(outcome.threshold, None);
        assert_eq!(outcome.selected_count_cal, 0);
        assert_eq!(outcome.bound_at_threshold, None);
    }

    #[test]
    fn sweep_matches_full_curve_selection() {
        // Mixed synthetic records, a few alphas, both methods.
        let mut records = Vec::new();
        let mut state = 0x2545F4914F6CDD1Du64;
        for i in 0..400 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let fail = ((state >> 11) as f64 / (1u64 << 53) as f64) < u;
            records.push(record(&format!("r{i:04}"), u, u8::from(!fail)));
        }
        let alphas = [0.05, 0.1, 0.2, 0.3];
        for method in [BoundMethod::CpExact, BoundMethod::Hoeffding] {
            let curve = build_curve(&records, 0.05, method).unwrap();
            let picks = sweep_select(&records, 0.05, method, &alphas).unwrap();
            for (&alpha, pick) in alphas.iter().zip(&picks) {
                assert_eq!(pick.threshold, select_threshold(&curve, alpha), "alpha {alpha}");
            }
        }
    }

    #[test]
    fn alpha_monotonicity_of_selection() {
        let records = {
            let mut v = Vec::new();
            for i in 0..200 {
                let u = i as f64 / 200.0;
                v.push(record(&format!("r{i:03}"), u, u8::from(i % 7 != 0)));
            }
            v
        };
        let curve = build_curve(&records, 0.05, BoundMethod::CpExact).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for alpha in [0.05, 0.1, 0.15, 0.2, 0.3, 0.5] {
            let t = select_threshold(&curve, alpha).unwrap_or(f64::NEG_INFINITY);
            assert!(t >= prev, "alpha {alpha}: {t} < {prev}");
            prev = t;
        }
    }

    #[test]
    fn calibrate_is_deterministic() {
        let records = three_records();
        let config = RiskConfig::new(0.3);
        let a = calibrate(&records, &config).unwrap();
        let b = calibrate(&records, &config).unwrap();
        assert_eq!(a, b);
    }
}
