//! One-sided upper confidence bounds on a Bernoulli failure rate.
//!
//! Two constructions share the module: the exact Clopper-Pearson bound,
//! inverted by bisection on a log-space binomial CDF, and the closed-form
//! Hoeffding bound. A Beta-quantile implementation of the same exact bound
//! exists purely as an independent cross-check route; the two must agree to
//! 1e-8 and tests enforce that.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BoundMethod;

/// Absolute bisection tolerance on the bound itself.
const RATE_TOLERANCE: f64 = 1e-10;
/// Hard cap on bisection iterations.
const MAX_BISECTIONS: usize = 200;
/// Terms smaller than this (relative to the peak term) are dropped from the
/// binomial CDF sum; both tails decay monotonically from the peak, so the
/// discarded mass is bounded by `cutoff * remaining_terms`.
const TERM_CUTOFF: f64 = 1e-18;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("failure count {failures} exceeds trial count {trials}")]
    TooManyFailures { failures: u64, trials: u64 },
    #[error("rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("delta {0} outside (0, 1)")]
    DeltaOutOfRange(f64),
}

/// Failure/trial counts plus the bound's significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    pub failures: u64,
    pub trials: u64,
    pub delta: f64,
}

impl BoundInput {
    pub fn new(failures: u64, trials: u64, delta: f64) -> Result<Self, BoundError> {
        check_counts(failures, trials)?;
        check_delta(delta)?;
        Ok(Self { failures, trials, delta })
    }
}

fn check_counts(failures: u64, trials: u64) -> Result<(), BoundError> {
    if trials == 0 {
        return Err(BoundError::NoTrials);
    }
    if failures > trials {
        return Err(BoundError::TooManyFailures { failures, trials });
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<(), BoundError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundError::DeltaOutOfRange(delta));
    }
    Ok(())
}

/// Neumaier-compensated summation.
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn new() -> Self {
        Self { sum: 0.0, compensation: 0.0 }
    }

    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Lanczos approximation (g = 7, 9 terms); relative error is a few ulps for
/// the positive arguments used here.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFF[0];
    for (i, &c) in LANCZOS_COEFF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Largest factorial index the double-double table will grow to; beyond it
/// the Lanczos route takes over (with looser accuracy from cancellation).
const LOG_FACTORIAL_TABLE_CAP: u64 = 4_194_304;

/// Double-double value: hi + lo with |lo| <= ulp(hi)/2.
#[derive(Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl DoubleDouble {
    const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    fn add_f64(self, x: f64) -> Self {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        Self { hi, lo }
    }

    fn sub(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, -other.hi);
        let lo = self.lo - other.lo + e;
        let (hi, lo) = two_sum(s, lo);
        Self { hi, lo }
    }
}

/// Cumulative ln-factorial table accumulated in double-double precision, so
/// differences of entries telescope exactly over the stored ln terms and
/// ln C(n, k) keeps near-ulp relative accuracy even where the naive
/// log-gamma difference cancels catastrophically.
fn log_factorials(upto: u64) -> std::sync::RwLockReadGuard<'static, Vec<DoubleDouble>> {
    use std::sync::{OnceLock, RwLock};
    static TABLE: OnceLock<RwLock<Vec<DoubleDouble>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| RwLock::new(vec![DoubleDouble::ZERO; 2]));
    {
        let read = table.read().expect("log-factorial table lock");
        if read.len() > upto as usize {
            return read;
        }
    }
    {
        let mut write = table.write().expect("log-factorial table lock");
        let mut acc = *write.last().expect("table seeded with 0! and 1!");
        while write.len() <= upto as usize {
            acc = acc.add_f64((write.len() as f64).ln());
            write.push(acc);
        }
    }
    table.read().expect("log-factorial table lock")
}

/// ln C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    assert!(k <= n, "ln_choose: k {k} exceeds n {n}");
    if k == 0 || k == n {
        return 0.0;
    }
    if n <= LOG_FACTORIAL_TABLE_CAP {
        let table = log_factorials(n);
        let diff = table[n as usize]
            .sub(table[k as usize])
            .sub(table[(n - k) as usize]);
        return diff.hi + diff.lo;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log Pr(Binomial(trials, rate) <= failures), computed in log space.
///
/// The sum is anchored at the largest term in `[0, failures]`; both tails
/// decrease monotonically away from it so they can be accumulated as plain
/// ratios with compensated summation and truncated safely. Returns exactly 0
/// when `failures == trials` or `rate == 0`, and -inf when `failures < trials`
/// and `rate == 1`.
pub fn binomial_log_cdf(failures: u64, trials: u64, rate: f64) -> Result<f64, BoundError> {
    check_counts(failures, trials)?;
    if !(0.0..=1.0).contains(&rate) {
        return Err(BoundError::RateOutOfRange(rate));
    }
    if failures == trials || rate == 0.0 {
        return Ok(0.0);
    }
    if rate == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }

    let m = trials;
    let w = failures;
    // The pmf over k in [0, w] peaks at min(w, floor((m+1) rate)).
    let peak = ((((m + 1) as f64) * rate).floor() as u64).min(w);
    let log_peak =
        ln_choose(m, peak) + peak as f64 * rate.ln() + (m - peak) as f64 * (-rate).ln_1p();

    let mut scaled = CompensatedSum::new();
    scaled.add(1.0);

    // Downward from the peak: term(k-1)/term(k) = k (1-rate) / ((m-k+1) rate).
    let odds_down = (1.0 - rate) / rate;
    let mut cur = 1.0;
    let mut k = peak;
    while k > 0 {
        cur *= odds_down * k as f64 / (m - k + 1) as f64;
        if cur * k as f64 <= TERM_CUTOFF {
            break;
        }
        scaled.add(cur);
        k -= 1;
    }

    // Upward from the peak to w: term(k+1)/term(k) = (m-k) rate / ((k+1)(1-rate)).
    let odds_up = rate / (1.0 - rate);
    cur = 1.0;
    k = peak;
    while k < w {
        cur *= odds_up * (m - k) as f64 / (k + 1) as f64;
        k += 1;
        if cur * (w - k + 1) as f64 <= TERM_CUTOFF {
            break;
        }
        scaled.add(cur);
    }

    Ok((log_peak + scaled.total().ln()).min(0.0))
}

/// Exact one-sided Clopper-Pearson upper confidence bound: the largest rate
/// R in [0, 1] with Pr(Binomial(trials, R) <= failures) >= delta, found by
/// bisection of the binomial CDF over [failures/trials, 1].
///
/// Returns exactly 1.0 when every trial failed.
pub fn clopper_pearson_upper(failures: u64, trials: u64, delta: f64) -> Result<f64, BoundError> {
    check_counts(failures, trials)?;
    check_delta(delta)?;
    if failures == trials {
        return Ok(1.0);
    }

    let log_delta = delta.ln();
    let mut lo = failures as f64 / trials as f64;
    let mut hi = 1.0;
    if binomial_log_cdf(failures, trials, lo)? < log_delta {
        // Only reachable for delta above the CDF at the empirical rate
        // (> 1/2); the bracket is degenerate and the empirical rate itself
        // is the conservative answer.
        return Ok(lo);
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= RATE_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if binomial_log_cdf(failures, trials, mid)? >= log_delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Regularized incomplete beta function I_x(a, b) via Lentz's continued
/// fraction.
fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FLOOR: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FLOOR {
        d = FLOOR;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FLOOR {
            d = FLOOR;
        }
        c = 1.0 + aa / c;
        if c.abs() < FLOOR {
            c = FLOOR;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FLOOR {
            d = FLOOR;
        }
        c = 1.0 + aa / c;
        if c.abs() < FLOOR {
            c = FLOOR;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// The same exact upper bound expressed as the (1 - delta) quantile of
/// Beta(failures + 1, trials - failures), solved by bisection on the
/// regularized incomplete beta function.
///
/// Exists as an independent route for cross-checking `clopper_pearson_upper`;
/// `failures == trials` degenerates to 1.0 by convention.
pub fn beta_quantile_upper(failures: u64, trials: u64, delta: f64) -> Result<f64, BoundError> {
    check_counts(failures, trials)?;
    check_delta(delta)?;
    if failures == trials {
        return Ok(1.0);
    }
    let a = failures as f64 + 1.0;
    let b = (trials - failures) as f64;
    let target = 1.0 - delta;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if regularized_incomplete_beta(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Distribution-free Hoeffding upper bound:
/// min(1, rate + sqrt(log(1/delta) / (2 trials))).
pub fn hoeffding_upper(rate: f64, trials: u64, delta: f64) -> Result<f64, BoundError> {
    if trials == 0 {
        return Err(BoundError::NoTrials);
    }
    check_delta(delta)?;
    if !(0.0..=1.0).contains(&rate) {
        return Err(BoundError::RateOutOfRange(rate));
    }
    let slack = ((1.0 / delta).ln() / (2.0 * trials as f64)).sqrt();
    Ok((rate + slack).min(1.0))
}

/// Dispatches to the selected bound construction with the empirical rate
/// failures / trials.
pub fn upper_bound(input: BoundInput, method: BoundMethod) -> Result<f64, BoundError> {
    match method {
        BoundMethod::CpExact => clopper_pearson_upper(input.failures, input.trials, input.delta),
        BoundMethod::Hoeffding => hoeffding_upper(
            input.failures as f64 / input.trials as f64,
            input.trials,
            input.delta,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_is_one_on_full_support() {
        assert_eq!(binomial_log_cdf(2, 2, 0.3).unwrap(), 0.0);
        assert_eq!(binomial_log_cdf(5, 5, 0.999).unwrap(), 0.0);
        assert_eq!(binomial_log_cdf(0, 10, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cdf_single_term_case() {
        // Pr(Binomial(10, 0.5) <= 0) = 2^-10.
        let got = binomial_log_cdf(0, 10, 0.5).unwrap();
        let expected = -10.0 * 2.0f64.ln();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn cdf_is_minus_infinity_at_certain_failure() {
        assert_eq!(binomial_log_cdf(3, 10, 1.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn cdf_rejects_bad_rate() {
        assert!(binomial_log_cdf(1, 2, -0.1).is_err());
        assert!(binomial_log_cdf(1, 2, 1.1).is_err());
        assert!(binomial_log_cdf(1, 2, f64::NAN).is_err());
        assert!(binomial_log_cdf(3, 2, 0.5).is_err());
        assert!(binomial_log_cdf(0, 0, 0.5).is_err());
    }

    #[test]
    fn cp_upper_closed_form_at_zero_failures() {
        for m in [1u64, 10, 100] {
            let got = clopper_pearson_upper(0, m, 0.05).unwrap();
            let expected = 1.0 - 0.05f64.powf(1.0 / m as f64);
            assert!(
                (got - expected).abs() < 1e-9,
                "m={m}: got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn cp_upper_is_one_when_all_fail() {
        assert_eq!(clopper_pearson_upper(7, 7, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn cp_upper_rejects_empty_trials() {
        assert_eq!(clopper_pearson_upper(0, 0, 0.05), Err(BoundError::NoTrials));
        assert!(clopper_pearson_upper(0, 5, 0.0).is_err());
        assert!(clopper_pearson_upper(0, 5, 1.0).is_err());
    }

    #[test]
    fn beta_quantile_of_uniform_is_the_level() {
        // Beta(1, 1) is uniform; its 0.5 quantile is 0.5.
        let got = beta_quantile_upper(0, 1, 0.5).unwrap();
        assert!((got - 0.5).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn beta_quantile_matches_cp_route() {
        let cp = clopper_pearson_upper(0, 10, 0.05).unwrap();
        let beta = beta_quantile_upper(0, 10, 0.05).unwrap();
        assert!((cp - beta).abs() < 1e-8, "cp {cp} vs beta {beta}");
        assert_eq!(beta_quantile_upper(4, 4, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn hoeffding_matches_formula() {
        let got = hoeffding_upper(0.1, 200, 0.05).unwrap();
        let expected = 0.1 + (20.0f64.ln() / 400.0).sqrt();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn hoeffding_slack_vanishes_as_delta_approaches_one() {
        let got = hoeffding_upper(0.3, 50, 0.999_999).unwrap();
        assert!((got - 0.3).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn hoeffding_clamps_to_one() {
        let delta = (-2.0f64).exp();
        assert_eq!(hoeffding_upper(0.5, 1, delta).unwrap(), 1.0);
    }

    #[test]
    fn upper_bound_dispatches() {
        let cp = upper_bound(BoundInput::new(0, 10, 0.05).unwrap(), BoundMethod::CpExact).unwrap();
        assert_eq!(cp, clopper_pearson_upper(0, 10, 0.05).unwrap());

        let hfd =
            upper_bound(BoundInput::new(1, 10, 0.05).unwrap(), BoundMethod::Hoeffding).unwrap();
        let expected = (0.1 + (20.0f64.ln() / 20.0).sqrt()).min(1.0);
        assert!((hfd - expected).abs() < 1e-15);

        let all_fail =
            upper_bound(BoundInput::new(10, 10, 0.2).unwrap(), BoundMethod::CpExact).unwrap();
        assert_eq!(all_fail, 1.0);
    }

    #[test]
    fn bound_input_validates() {
        assert!(BoundInput::new(3, 2, 0.05).is_err());
        assert!(BoundInput::new(0, 0, 0.05).is_err());
        assert!(BoundInput::new(1, 2, 1.0).is_err());
    }

    #[test]
    fn bounds_monotone_in_failures_and_delta() {
        for m in [1u64, 5, 20, 50] {
            for delta in [0.01, 0.05, 0.1] {
                let mut prev_cp = 0.0;
                let mut prev_hfd = 0.0;
                for w in 0..=m {
                    let cp = clopper_pearson_upper(w, m, delta).unwrap();
                    let hfd = hoeffding_upper(w as f64 / m as f64, m, delta).unwrap();
                    assert!(cp >= prev_cp - 1e-12);
                    assert!(hfd >= prev_hfd - 1e-12);
                    // Exact bound never exceeds the concentration bound.
                    assert!(cp <= hfd + 1e-9, "w={w} m={m} delta={delta}: {cp} > {hfd}");
                    assert!(cp >= w as f64 / m as f64 - 1e-9);
                    prev_cp = cp;
                    prev_hfd = hfd;
                }
            }
        }
        // Non-increasing in delta.
        for w in [0u64, 2, 5] {
            let tight = clopper_pearson_upper(w, 10, 0.2).unwrap();
            let loose = clopper_pearson_upper(w, 10, 0.01).unwrap();
            assert!(tight <= loose + 1e-12);
            let tight = hoeffding_upper(w as f64 / 10.0, 10, 0.2).unwrap();
            let loose = hoeffding_upper(w as f64 / 10.0, 10, 0.01).unwrap();
            assert!(tight <= loose + 1e-12);
        }
    }

    #[test]
    fn cdf_handles_large_trial_counts() {
        // Underflow territory for naive linear-space summation.
        let log_cdf = binomial_log_cdf(400_000, 1_000_000, 0.5).unwrap();
        assert!(log_cdf.is_finite());
        assert!(log_cdf < -1000.0, "got {log_cdf}");
        let bound = clopper_pearson_upper(500, 1_000_000, 0.05).unwrap();
        assert!((bound - 0.0005).abs() < 0.0001, "got {bound}");
    }
}
