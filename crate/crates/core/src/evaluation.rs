//! Randomized-split trial harness for test-time FDR and power, plus a
//! synthetic population generator with an analytic conditional-failure-rate
//! oracle for validating the calibration guarantee end to end.

use thiserror::Error;

use crate::calibration::{CalibrationError, sweep_select};
use crate::model::{ModelError, RiskConfig, ScoredRecord, TrialOutcome, TrialReport};
use crate::rng::{StreamPurpose, derive_seed, shuffle, substream, uniform_f64};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("risk function must be non-decreasing with values in [0, 1]")]
    BadRiskFunction,
    #[error("threshold {0} lies below the uncertainty support")]
    BelowSupport(f64),
    #[error("test set contains no admissible record; power is undefined")]
    NoAdmissibleTest,
    #[error("population must contain at least 2 records")]
    PopulationTooSmall,
    #[error("split ratio leaves no test records")]
    NoTestRecords,
    #[error("guarantee check needs at least 100 repeats, got {0}")]
    TooFewRepeats(usize),
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Config(#[from] ModelError),
}

/// Monotone map from uncertainty in [0, 1] to failure probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskFunction {
    /// q(u) = u.
    Linear,
    /// q(u) = 1 / (1 + exp(-slope (u - center))).
    Logistic { slope: f64, center: f64 },
    /// q(u) = low for u < cut, high otherwise.
    Step { low: f64, high: f64, cut: f64 },
}

/// Distribution of the uncertainty score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UncertaintyLaw {
    #[default]
    Uniform,
}

/// Synthetic data-generating process with a known conditional failure rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticModel {
    pub risk: RiskFunction,
    pub law: UncertaintyLaw,
}

impl SyntheticModel {
    pub fn new(risk: RiskFunction) -> Result<Self, EvalError> {
        match risk {
            RiskFunction::Linear => {}
            RiskFunction::Logistic { slope, .. } => {
                if !(slope.is_finite() && slope >= 0.0) {
                    return Err(EvalError::BadRiskFunction);
                }
            }
            RiskFunction::Step { low, high, cut: _ } => {
                let in_range = |x: f64| (0.0..=1.0).contains(&x);
                if !(in_range(low) && in_range(high) && low <= high) {
                    return Err(EvalError::BadRiskFunction);
                }
            }
        }
        Ok(Self { risk, law: UncertaintyLaw::Uniform })
    }

    /// Failure probability at uncertainty u.
    pub fn failure_probability(&self, u: f64) -> f64 {
        match self.risk {
            RiskFunction::Linear => u,
            RiskFunction::Logistic { slope, center } => {
                1.0 / (1.0 + (-slope * (u - center)).exp())
            }
            RiskFunction::Step { low, high, cut } => {
                if u < cut {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// Draws a population of scored records: uncertainties from the model's law,
/// admissibility as Bernoulli(1 - q(u)). Identical (n, model, seed) produce
/// bit-identical output.
pub fn gen_population(n: usize, model: &SyntheticModel, seed: u64) -> Vec<ScoredRecord> {
    let mut rng = substream(seed, 0, StreamPurpose::Population);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let u = uniform_f64(&mut rng);
        let failed = uniform_f64(&mut rng) < model.failure_probability(u);
        records.push(
            ScoredRecord::new(format!("synth-{i:08}"), u, u8::from(!failed))
                .expect("generated uncertainty is finite"),
        );
    }
    records
}

/// Adaptive Simpson quadrature with Richardson correction.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tolerance: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), mid, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        mid: f64,
        fm: f64,
        tolerance: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, mid, fm);
        let (right, rm, frm) = simpson(f, mid, fm, b, fb);
        let delta = left + right - whole;
        if depth >= 60 || delta.abs() <= 15.0 * tolerance {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, mid, fm, left, lm, flm, tolerance / 2.0, depth + 1)
            + recurse(f, mid, fm, b, fb, right, rm, frm, tolerance / 2.0, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, mid, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, mid, fm, tolerance, 0)
}

/// True conditional failure rate E[q(u) | u <= t] for the built-in models.
///
/// Linear and step risks have closed forms; the logistic risk is integrated
/// by adaptive quadrature to 1e-10. Thresholds beyond the support's upper
/// end condition on the full support; t = 0 returns the q(0+) limit.
pub fn true_tcfr(model: &SyntheticModel, t: f64) -> Result<f64, EvalError> {
    if t < 0.0 || t.is_nan() {
        return Err(EvalError::BelowSupport(t));
    }
    let t = t.min(1.0);
    let value = match model.risk {
        RiskFunction::Linear => t / 2.0,
        RiskFunction::Step { low, high, cut } => {
            if t <= cut {
                low
            } else {
                (low * cut + high * (t - cut)) / t
            }
        }
        RiskFunction::Logistic { .. } => {
            if t == 0.0 {
                model.failure_probability(0.0)
            } else {
                adaptive_simpson(&|u| model.failure_probability(u), 0.0, t, 1e-10) / t
            }
        }
    };
    Ok(value)
}

/// Records retained by the threshold policy; empty when the threshold is
/// absent.
pub fn apply_threshold(test: &[ScoredRecord], threshold: Option<f64>) -> Vec<&ScoredRecord> {
    match threshold {
        Some(t) => test.iter().filter(|r| r.uncertainty <= t).collect(),
        None => Vec::new(),
    }
}

/// Failure fraction among the selected records; absent for an empty
/// selection.
pub fn test_fdr(selected: &[&ScoredRecord]) -> Option<f64> {
    if selected.is_empty() {
        return None;
    }
    let failures = selected.iter().filter(|r| r.is_failure()).count();
    Some(failures as f64 / selected.len() as f64)
}

/// Fraction of admissible test records that were selected, zeroed when the
/// selection's FDR exceeds alpha. An empty selection has raw power 0 and is
/// vacuously risk-safe.
pub fn power(
    selected: &[&ScoredRecord],
    test: &[ScoredRecord],
    alpha: f64,
) -> Result<f64, EvalError> {
    let admissible_total = test.iter().filter(|r| !r.is_failure()).count();
    if admissible_total == 0 {
        return Err(EvalError::NoAdmissibleTest);
    }
    let admissible_selected = selected.iter().filter(|r| !r.is_failure()).count();
    let raw = admissible_selected as f64 / admissible_total as f64;
    match test_fdr(selected) {
        Some(fdr) if fdr > alpha => Ok(0.0),
        _ => Ok(raw),
    }
}

/// The trial's (calibration, test) partition. Trial k's shuffle depends
/// only on (config.seed, k); the calibration side takes the first
/// ceil(split_ratio * N) shuffled records.
pub fn trial_split(
    population: &[ScoredRecord],
    config: &RiskConfig,
    trial: u32,
) -> Result<(Vec<ScoredRecord>, Vec<ScoredRecord>), EvalError> {
    let n = population.len();
    if n < 2 {
        return Err(EvalError::PopulationTooSmall);
    }
    let cal_n = ((config.split_ratio * n as f64).ceil() as usize).clamp(1, n);
    if cal_n >= n {
        return Err(EvalError::NoTestRecords);
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = substream(config.seed, trial as u64, StreamPurpose::Shuffle);
    shuffle(&mut indices, &mut rng);
    let cal = indices[..cal_n].iter().map(|&i| population[i].clone()).collect();
    let test = indices[cal_n..].iter().map(|&i| population[i].clone()).collect();
    Ok((cal, test))
}

struct TrialData {
    /// Calibration half of the shuffled population.
    cal: Vec<ScoredRecord>,
    /// Test half, sorted ascending by uncertainty.
    test_sorted: Vec<(f64, bool)>,
    /// test_fail_prefix[i] = failures among the first i sorted test records.
    test_fail_prefix: Vec<u64>,
    admissible_total: u64,
}

fn split_trial(population: &[ScoredRecord], config: &RiskConfig, trial: u32) -> Result<TrialData, EvalError> {
    let (cal, test) = trial_split(population, config, trial)?;
    let mut test_sorted: Vec<(f64, bool)> =
        test.iter().map(|r| (r.uncertainty, r.is_failure())).collect();
    test_sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut test_fail_prefix = Vec::with_capacity(test_sorted.len() + 1);
    test_fail_prefix.push(0u64);
    let mut failures = 0u64;
    for &(_, failed) in &test_sorted {
        failures += u64::from(failed);
        test_fail_prefix.push(failures);
    }
    let admissible_total = test_sorted.len() as u64 - failures;
    if admissible_total == 0 {
        return Err(EvalError::NoAdmissibleTest);
    }
    Ok(TrialData { cal, test_sorted, test_fail_prefix, admissible_total })
}

/// Runs the randomized-split harness once per alpha over shared trial
/// splits. Trial k's split depends only on (seed, k), so per-alpha results
/// are identical to running each alpha alone.
pub fn run_trials_grid(
    population: &[ScoredRecord],
    config: &RiskConfig,
    alphas: &[f64],
) -> Result<Vec<TrialReport>, EvalError> {
    config.validate()?;
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(EvalError::Config(ModelError::AlphaOutOfRange(alpha)));
        }
    }
    if population.len() < 2 {
        return Err(EvalError::PopulationTooSmall);
    }

    let mut per_alpha: Vec<Vec<TrialOutcome>> =
        vec![Vec::with_capacity(config.n_trials as usize); alphas.len()];
    for trial in 0..config.n_trials {
        let data = split_trial(population, config, trial)?;
        let picks = sweep_select(&data.cal, config.delta, config.bound_method, alphas)?;
        for (idx, (&alpha, pick)) in alphas.iter().zip(&picks).enumerate() {
            let count = match pick.threshold {
                Some(t) => data.test_sorted.partition_point(|&(u, _)| u <= t),
                None => 0,
            };
            let failures = data.test_fail_prefix[count];
            let fdr = (count > 0).then(|| failures as f64 / count as f64);
            let raw_power = (count as u64 - failures) as f64 / data.admissible_total as f64;
            let power = match fdr {
                Some(f) if f > alpha => 0.0,
                _ => raw_power,
            };
            per_alpha[idx].push(TrialOutcome {
                trial,
                threshold: pick.threshold,
                test_fdr: fdr,
                power,
                n_selected: count as u64,
            });
        }
    }

    Ok(alphas
        .iter()
        .zip(per_alpha)
        .map(|(&alpha, per_trial)| summarize(alpha, per_trial))
        .collect())
}

/// Single-alpha randomized-split harness; see `run_trials_grid`.
pub fn run_trials(population: &[ScoredRecord], config: &RiskConfig) -> Result<TrialReport, EvalError> {
    let mut reports = run_trials_grid(population, config, &[config.alpha])?;
    Ok(reports.pop().expect("one alpha in, one report out"))
}

fn summarize(alpha: f64, per_trial: Vec<TrialOutcome>) -> TrialReport {
    let defined: Vec<f64> = per_trial.iter().filter_map(|t| t.test_fdr).collect();
    let (mean_fdr, std_fdr) = if defined.is_empty() {
        (None, None)
    } else {
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        let var = defined.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / defined.len() as f64;
        (Some(mean), Some(var.sqrt()))
    };
    let mean_power = per_trial.iter().map(|t| t.power).sum::<f64>() / per_trial.len() as f64;
    let violations = per_trial
        .iter()
        .filter(|t| t.test_fdr.is_some_and(|f| f > alpha))
        .count();
    let violation_fraction = violations as f64 / per_trial.len() as f64;
    TrialReport {
        alpha,
        per_trial,
        mean_fdr,
        std_fdr,
        mean_power,
        violation_fraction,
    }
}

/// Outcome of repeated fresh-calibration guarantee checks against the
/// analytic conditional failure rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeReport {
    /// Fraction of repeats where the true rate at the calibrated threshold
    /// exceeded alpha; an absent threshold counts as a non-violation.
    pub violation_fraction: f64,
    /// Mean true rate over the repeats that produced a threshold.
    pub mean_true_tcfr: Option<f64>,
    pub thresholds_found: u64,
    pub repeats: u64,
}

/// Draws `n_repeats` fresh calibration sets from the model, calibrates each,
/// and evaluates the true conditional failure rate at the chosen threshold
/// analytically.
pub fn guarantee_check(
    model: &SyntheticModel,
    cal_size: usize,
    n_repeats: usize,
    config: &RiskConfig,
) -> Result<GuaranteeReport, EvalError> {
    config.validate()?;
    if n_repeats < 100 {
        return Err(EvalError::TooFewRepeats(n_repeats));
    }
    if cal_size == 0 {
        return Err(EvalError::EmptyPopulation);
    }

    let mut violations = 0u64;
    let mut found = 0u64;
    let mut tcfr_sum = 0.0;
    for repeat in 0..n_repeats {
        let records = gen_population(cal_size, model, derive_seed(config.seed, repeat as u64));
        let pick = &sweep_select(&records, config.delta, config.bound_method, &[config.alpha])?[0];
        if let Some(t) = pick.threshold {
            let rate = true_tcfr(model, t)?;
            found += 1;
            tcfr_sum += rate;
            if rate > config.alpha {
                violations += 1;
            }
        }
    }
    Ok(GuaranteeReport {
        violation_fraction: violations as f64 / n_repeats as f64,
        mean_true_tcfr: (found > 0).then(|| tcfr_sum / found as f64),
        thresholds_found: found,
        repeats: n_repeats as u64,
    })
}
