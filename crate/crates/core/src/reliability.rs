//! Conjugate posteriors and the quantile-based reliability criterion.
//!
//! An estimate of a rate `π` is reliable at level `1 − α` when the posterior medians
//! of `π` and of `1 − π` each exceed the width of their `(1 − α)` equal-tailed
//! credible intervals. Both intervals have the same width, so the check reduces to
//! `min(m, 1 − m) / width > 1`, the *relative precision*. Rates without an upper
//! bound (the gamma-Poisson case) use `m / width`.

use std::fmt::Display;

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{beta_inc, beta_inc_inv, gamma_inc, gamma_inc_inv};
use crate::{lit, Real};

/// Case multiplier behind the "CV < 1/4" rule: `(y + a) > 16 (1 − E[π])`.
pub const CV_CASE_MULTIPLIER: f64 = 16.0;

/// Reliability levels are reported inside this band.
pub const LEVEL_FLOOR: f64 = 0.001;
pub const LEVEL_CEIL: f64 = 0.999;
/// Absolute tolerance of the reliability-level bisection.
pub const LEVEL_TOL: f64 = 1e-4;

const REQUIRED_CASES_SEARCH_CAP: u64 = 1_000_000;

/// One stratified observation: `events` cases out of `trials`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountRecord {
    pub region_id: String,
    pub stratum: String,
    pub year: i32,
    pub events: u64,
    pub trials: u64,
}

impl CountRecord {
    pub fn new(
        region_id: impl Into<String>,
        stratum: impl Into<String>,
        year: i32,
        events: u64,
        trials: u64,
    ) -> Result<Self> {
        let rec = CountRecord {
            region_id: region_id.into(),
            stratum: stratum.into(),
            year,
            events,
            trials,
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Unkeyed record, for conjugate calculations.
    pub fn counts(events: u64, trials: u64) -> Result<Self> {
        Self::new("", "", 0, events, trials)
    }

    pub fn validate(&self) -> Result<()> {
        if self.events > self.trials {
            return Err(Error::invalid(format!(
                "region `{}`: events {} exceed trials {}",
                self.region_id, self.events, self.trials
            )));
        }
        Ok(())
    }

    pub fn crude_rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.events as f64 / self.trials as f64)
    }
}

/// Beta prior in "prior cases / prior non-cases" form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior<T> {
    pub prior_cases: T,
    pub prior_noncases: T,
}

impl<T: Num + PartialOrd + Copy + Display> BetaPrior<T> {
    pub fn new(prior_cases: T, prior_noncases: T) -> Result<Self> {
        if !(prior_cases > T::zero() && prior_noncases > T::zero()) {
            return Err(Error::invalid(format!(
                "beta prior needs positive shapes, got ({prior_cases}, {prior_noncases})"
            )));
        }
        Ok(BetaPrior { prior_cases, prior_noncases })
    }

    pub fn mean(&self) -> T {
        self.prior_cases / (self.prior_cases + self.prior_noncases)
    }
}

fn check_rate<T: Num + PartialOrd + Display>(pi0: &T) -> Result<()> {
    if *pi0 > T::zero() && *pi0 < T::one() {
        Ok(())
    } else {
        Err(Error::invalid(format!("rate {pi0} outside (0, 1)")))
    }
}

/// Prior with `a` prior cases whose mean is `pi0`: `b = a (1 − π₀) / π₀`.
pub fn prior_from_rate<T: Num + PartialOrd + Copy + Display>(pi0: T, a: T) -> Result<BetaPrior<T>> {
    check_rate(&pi0)?;
    BetaPrior::new(a, a * (T::one() - pi0) / pi0)
}

/// Prior-case budget `multiplier × (1 − π₀) / 2`.
///
/// A prior contributing fewer cases than this forces the data to supply the majority
/// of the posterior cases needed for reliability.
pub fn max_prior_info<T: Num + PartialOrd + Copy + Display>(pi0: T, multiplier: T) -> Result<T> {
    let two = T::one() + T::one();
    Ok(posterior_case_threshold(pi0, multiplier)? / two)
}

/// Posterior cases `multiplier × (1 − π₀)` required by the CV rule.
pub fn posterior_case_threshold<T: Num + PartialOrd + Copy + Display>(
    pi0: T,
    multiplier: T,
) -> Result<T> {
    check_rate(&pi0)?;
    Ok(multiplier * (T::one() - pi0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `Beta(shape1, shape2)` on a rate in (0, 1).
    Beta,
    /// `Gamma(shape1, rate = shape2)` on a rate per unit exposure.
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePosterior<F> {
    pub family: Family,
    pub shape1: F,
    pub shape2: F,
}

impl<F: Real> ConjugatePosterior<F> {
    pub fn beta(shape1: F, shape2: F) -> Result<Self> {
        Self::checked(Family::Beta, shape1, shape2)
    }

    pub fn gamma(shape: F, rate: F) -> Result<Self> {
        Self::checked(Family::Gamma, shape, rate)
    }

    fn checked(family: Family, shape1: F, shape2: F) -> Result<Self> {
        if !(shape1 > F::zero() && shape2 > F::zero() && shape1.is_finite() && shape2.is_finite()) {
            return Err(Error::invalid(format!(
                "{family:?} posterior needs finite positive parameters, got ({shape1}, {shape2})"
            )));
        }
        Ok(ConjugatePosterior { family, shape1, shape2 })
    }

    pub fn mean(&self) -> F {
        match self.family {
            Family::Beta => self.shape1 / (self.shape1 + self.shape2),
            Family::Gamma => self.shape1 / self.shape2,
        }
    }

    pub fn cdf(&self, x: F) -> Result<F> {
        match self.family {
            Family::Beta => beta_inc(self.shape1, self.shape2, x),
            Family::Gamma => gamma_inc(self.shape1, x * self.shape2),
        }
    }

    pub fn quantile(&self, p: F) -> Result<F> {
        match self.family {
            Family::Beta => beta_inc_inv(self.shape1, self.shape2, p),
            Family::Gamma => Ok(gamma_inc_inv(self.shape1, p)? / self.shape2),
        }
    }

    /// The distribution of `1 − π`.
    pub fn opposite(&self) -> Option<Self> {
        match self.family {
            Family::Beta => Some(ConjugatePosterior { shape1: self.shape2, shape2: self.shape1, ..*self }),
            Family::Gamma => None,
        }
    }

    // Member of the {π, 1 − π} pair with shape1 ≤ shape2; both orderings reduce to it.
    fn canonical(&self) -> (Self, bool) {
        match self.family {
            Family::Beta if self.shape1 > self.shape2 => (self.opposite().unwrap(), true),
            _ => (*self, false),
        }
    }
}

/// Anything that yields a posterior median and equal-tailed intervals for a rate.
pub trait RateSummary<F: Real> {
    fn median(&self) -> Result<F>;

    /// Equal-tailed interval `(q(α/2), q(1 − α/2))` at `level = 1 − α`.
    fn interval(&self, level: F) -> Result<(F, F)>;

    /// `true` when the rate lives in (0, 1) and so has an opposite `1 − π`.
    fn has_opposite(&self) -> bool;

    /// `min(m, 1 − m) / width`, or `m / width` without an opposite.
    fn relative_precision(&self, level: F) -> Result<F> {
        let m = self.median()?;
        let (lo, hi) = self.interval(level)?;
        let width = hi - lo;
        if !(width > F::zero()) {
            return Err(Error::DegenerateInterval);
        }
        let centre = if self.has_opposite() { m.min(F::one() - m) } else { m };
        Ok(centre / width)
    }
}

fn check_level<F: Real>(level: F) -> Result<()> {
    if level > F::zero() && level < F::one() {
        Ok(())
    } else {
        Err(Error::invalid(format!("credibility level {level} outside (0, 1)")))
    }
}

impl<F: Real> RateSummary<F> for ConjugatePosterior<F> {
    fn median(&self) -> Result<F> {
        self.quantile(lit(0.5))
    }

    fn interval(&self, level: F) -> Result<(F, F)> {
        check_level(level)?;
        let (canon, flipped) = self.canonical();
        let tail = (F::one() - level) / lit(2.0);
        let lo = canon.quantile(tail)?;
        let hi = canon.quantile(F::one() - tail)?;
        if flipped {
            Ok((F::one() - hi, F::one() - lo))
        } else {
            Ok((lo, hi))
        }
    }

    fn has_opposite(&self) -> bool {
        self.family == Family::Beta
    }

    fn relative_precision(&self, level: F) -> Result<F> {
        let (canon, _) = self.canonical();
        let m = canon.median()?;
        let (lo, hi) = canon.interval(level)?;
        let width = hi - lo;
        if !(width > F::zero()) {
            return Err(Error::DegenerateInterval);
        }
        let centre = if canon.has_opposite() { m.min(F::one() - m) } else { m };
        Ok(centre / width)
    }
}

/// `Beta(y + a, n − y + b)`; requires at least one trial.
pub fn beta_posterior<F: Real>(rec: &CountRecord, prior: &BetaPrior<F>) -> Result<ConjugatePosterior<F>> {
    rec.validate()?;
    if rec.trials == 0 {
        return Err(Error::invalid("conjugate assessment needs at least one trial"));
    }
    BetaPrior::new(prior.prior_cases, prior.prior_noncases)?;
    let y = lit::<F>(rec.events as f64);
    let n = lit::<F>(rec.trials as f64);
    ConjugatePosterior::beta(y + prior.prior_cases, n - y + prior.prior_noncases)
}

/// `Gamma(y + a, rate n + b)`, where `n` is the exposure.
pub fn gamma_posterior<F: Real>(rec: &CountRecord, prior_shape: F, prior_rate: F) -> Result<ConjugatePosterior<F>> {
    rec.validate()?;
    if !(prior_shape > F::zero() && prior_rate > F::zero()) {
        return Err(Error::invalid("gamma prior needs positive shape and rate"));
    }
    let y = lit::<F>(rec.events as f64);
    let n = lit::<F>(rec.trials as f64);
    ConjugatePosterior::gamma(y + prior_shape, n + prior_rate)
}

/// Posterior coefficient of variation, `sd / mean`.
pub fn posterior_cv<F: Real>(post: &ConjugatePosterior<F>) -> F {
    let (s1, s2) = (post.shape1, post.shape2);
    match post.family {
        Family::Beta => (s2 / (s1 * (s1 + s2 + F::one()))).sqrt(),
        Family::Gamma => F::one() / s1.sqrt(),
    }
}

/// The CV rule: `CV < 1/4`.
pub fn is_reliable_cv<F: Real>(post: &ConjugatePosterior<F>) -> bool {
    posterior_cv(post) < lit(0.25)
}

pub fn equal_tailed_ci<F: Real>(post: &ConjugatePosterior<F>, level: F) -> Result<(F, F)> {
    post.interval(level)
}

pub fn relative_precision<F: Real, S: RateSummary<F> + ?Sized>(s: &S, level: F) -> Result<F> {
    s.relative_precision(level)
}

pub fn is_reliable<F: Real, S: RateSummary<F> + ?Sized>(s: &S, level: F) -> Result<bool> {
    match s.relative_precision(level) {
        Ok(rp) => Ok(rp > F::one()),
        // a zero-width interval is infinitely precise
        Err(Error::DegenerateInterval) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Largest level `1 − α` at which `s` is still reliable, clamped to
/// `[LEVEL_FLOOR, LEVEL_CEIL]` and located by bisection to `LEVEL_TOL`.
pub fn reliability_level<F: Real, S: RateSummary<F> + ?Sized>(s: &S) -> Result<F> {
    let mut lo = lit::<F>(LEVEL_FLOOR);
    let mut hi = lit::<F>(LEVEL_CEIL);
    if is_reliable(s, hi)? {
        return Ok(hi);
    }
    if !is_reliable(s, lo)? {
        return Ok(lo);
    }
    let tol = lit::<F>(LEVEL_TOL);
    let max_iter = 64;
    for _ in 0..max_iter {
        if hi - lo <= tol {
            return Ok(lo);
        }
        let mid = (lo + hi) / lit(2.0);
        if is_reliable(s, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence { what: "reliability-level bisection", iterations: max_iter })
}

/// Summary of one posterior at a fixed level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityAssessment<F> {
    pub median: F,
    pub ci_low: F,
    pub ci_high: F,
    pub level_used: F,
    /// `+∞` when the interval has zero width.
    pub relative_precision: F,
    pub reliability_level: F,
    pub reliable: bool,
    pub degenerate: bool,
}

impl<F: Real> ReliabilityAssessment<F> {
    pub fn of<S: RateSummary<F> + ?Sized>(s: &S, level: F) -> Result<Self> {
        check_level(level)?;
        let median = s.median()?;
        let (ci_low, ci_high) = s.interval(level)?;
        let (relative_precision, degenerate) = match s.relative_precision(level) {
            Ok(rp) => (rp, false),
            Err(Error::DegenerateInterval) => (F::infinity(), true),
            Err(e) => return Err(e),
        };
        Ok(ReliabilityAssessment {
            median,
            ci_low,
            ci_high,
            level_used: level,
            relative_precision,
            reliability_level: reliability_level(s)?,
            reliable: relative_precision > F::one(),
            degenerate,
        })
    }
}

/// Conjugate assessment of one record under a beta prior.
pub fn assess_conjugate<F: Real>(rec: &CountRecord, prior: &BetaPrior<F>, level: F) -> Result<ReliabilityAssessment<F>> {
    ReliabilityAssessment::of(&beta_posterior(rec, prior)?, level)
}

fn trials_for(y: u64, pi0: f64, n: Option<u64>) -> u64 {
    n.unwrap_or_else(|| ((y as f64 / pi0).round() as u64).max(1))
}

/// Smallest `y` for which `Beta(y + a, n − y + b)` is reliable at `level`, with
/// the prior built by [`prior_from_rate`].
///
/// Without `n`, the trials follow the events along the fixed-rate curve
/// `n = round(y / π₀)`. Returns `None` when no `y ≤ n` qualifies.
pub fn required_cases<F: Real>(pi0: F, a: F, level: F, n: Option<u64>) -> Result<Option<u64>> {
    required_cases_by(pi0, a, n, |post| is_reliable(post, level))
}

/// As [`required_cases`] but with the CV rule in place of the quantile criterion.
pub fn required_cases_cv<F: Real>(pi0: F, a: F, n: Option<u64>) -> Result<Option<u64>> {
    required_cases_by(pi0, a, n, |post| Ok(is_reliable_cv(post)))
}

fn required_cases_by<F: Real>(
    pi0: F,
    a: F,
    n: Option<u64>,
    criterion: impl Fn(&ConjugatePosterior<F>) -> Result<bool>,
) -> Result<Option<u64>> {
    let prior = prior_from_rate(pi0, a)?;
    let pi0 = pi0.to_f64().unwrap();
    let cap = n.unwrap_or(REQUIRED_CASES_SEARCH_CAP);
    for y in 0..=cap {
        let trials = trials_for(y, pi0, n);
        if y > trials {
            continue;
        }
        let post = beta_posterior(&CountRecord::counts(y, trials)?, &prior)?;
        if criterion(&post)? {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn beta(a: f64, b: f64) -> ConjugatePosterior<f64> {
        ConjugatePosterior::beta(a, b).unwrap()
    }

    #[test]
    fn beta_posterior_adds_counts() {
        let prior = BetaPrior::new(0.5, 49.5).unwrap();
        let p = beta_posterior(&CountRecord::counts(2, 9).unwrap(), &prior).unwrap();
        assert_eq!((p.shape1, p.shape2), (2.5, 56.5));
        let p = beta_posterior(&CountRecord::counts(16, 1600).unwrap(), &prior).unwrap();
        assert_eq!((p.shape1, p.shape2), (16.5, 1633.5));
        assert_eq!(p.shape1 + p.shape2, 1600.0 + 0.5 + 49.5);
    }

    #[test]
    fn zero_trials_rejected() {
        let prior = BetaPrior::new(0.5, 49.5).unwrap();
        assert!(beta_posterior(&CountRecord::counts(0, 0).unwrap(), &prior).is_err());
        assert!(CountRecord::counts(5, 4).is_err());
    }

    #[test]
    fn gamma_posterior_adds_exposure() {
        let rec = CountRecord::counts(0, 100).unwrap();
        let p = gamma_posterior(&rec, 1.0, 1.0).unwrap();
        assert_eq!((p.family, p.shape1, p.shape2), (Family::Gamma, 1.0, 101.0));
        let p = gamma_posterior(&CountRecord::counts(16, 1000).unwrap(), 0.5, 50.0).unwrap();
        assert_eq!((p.shape1, p.shape2), (16.5, 1050.0));
    }

    #[test]
    fn cv_values() {
        assert_relative_eq!(posterior_cv(&beta(1.0, 1.0)), (1.0_f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert!(posterior_cv(&beta(16.5, 1633.5)) < 0.25);
        let g = ConjugatePosterior::gamma(16.0, 3.0).unwrap();
        assert_eq!(posterior_cv(&g), 0.25);
    }

    #[test]
    fn prior_construction() {
        let p = prior_from_rate(0.01, 0.5).unwrap();
        assert_relative_eq!(p.prior_noncases, 49.5, epsilon = 1e-12);
        assert_eq!(prior_from_rate(0.5, 1.0).unwrap(), BetaPrior { prior_cases: 1.0, prior_noncases: 1.0 });
        let p = prior_from_rate(0.10, 7.2).unwrap();
        assert_relative_eq!(p.prior_noncases, 64.8, epsilon = 1e-12);
        assert!(prior_from_rate(0.0, 0.5).is_err());
        assert!(prior_from_rate(1.0, 0.5).is_err());
    }

    #[test]
    fn prior_budget_in_exact_arithmetic() {
        use num_rational::Ratio;
        let pi0 = Ratio::new(1_i64, 10);
        let sixteen = Ratio::from_integer(16);
        assert_eq!(max_prior_info(pi0, sixteen).unwrap(), Ratio::new(36, 5));
        assert_eq!(posterior_case_threshold(pi0, sixteen).unwrap(), Ratio::new(72, 5));
        let p = prior_from_rate(pi0, Ratio::new(36, 5)).unwrap();
        assert_eq!(p.prior_noncases, Ratio::new(324, 5));
        assert_eq!(p.mean(), pi0);
        // limit π₀ → 0
        let tiny = Ratio::new(1_i64, 1_000_000_000);
        assert!((max_prior_info(tiny, sixteen).unwrap() - Ratio::from_integer(8)) < Ratio::new(1, 100_000_000));
    }

    #[test]
    fn uniform_and_exponential_intervals() {
        let (lo, hi) = equal_tailed_ci(&beta(1.0, 1.0), 0.95).unwrap();
        assert_relative_eq!(lo, 0.025, epsilon = 1e-9);
        assert_relative_eq!(hi, 0.975, epsilon = 1e-9);
        let g = ConjugatePosterior::gamma(1.0, 1.0).unwrap();
        let (lo, hi) = equal_tailed_ci(&g, 0.90).unwrap();
        assert_relative_eq!(lo, -(0.95_f64.ln()), max_relative = 1e-8);
        assert_relative_eq!(hi, -(0.05_f64.ln()), max_relative = 1e-8);
        assert!(equal_tailed_ci(&g, 1.0).is_err());
    }

    #[test]
    fn sixteen_case_boundary() {
        assert!(relative_precision(&beta(16.5, 1633.5), 0.95).unwrap() > 1.0);
        assert!(relative_precision(&beta(15.5, 1634.5), 0.95).unwrap() < 1.0);
        assert!(is_reliable(&beta(16.5, 1633.5), 0.95).unwrap());
        assert!(!is_reliable(&beta(0.5, 49.5), 0.95).unwrap());
        assert!(is_reliable(&beta(0.5, 49.5), 1e-6).unwrap());
    }

    #[test]
    fn opposite_symmetry_is_bitwise() {
        for &(a, b) in &[(2.5, 56.5), (16.5, 1633.5), (0.7, 0.9), (40.0, 3.0)] {
            assert_eq!(
                relative_precision(&beta(a, b), 0.95).unwrap(),
                relative_precision(&beta(b, a), 0.95).unwrap()
            );
            assert_eq!(reliability_level(&beta(a, b)).unwrap(), reliability_level(&beta(b, a)).unwrap());
        }
    }

    #[test]
    fn reliability_levels_match_thresholds() {
        let prior = prior_from_rate(0.01, 0.5).unwrap();
        let at = |y: u64| {
            let post = beta_posterior(&CountRecord::counts(y, y * 100).unwrap(), &prior).unwrap();
            reliability_level(&post).unwrap()
        };
        assert!(at(11) >= 0.90 && at(11) < 0.95, "{}", at(11));
        assert!(at(10) < 0.90);
        assert!(at(7) >= 0.80 && at(7) < 0.85, "{}", at(7));
        assert!(at(6) < 0.80);
    }

    #[test]
    fn required_cases_small_grid() {
        assert_eq!(required_cases(0.01, 0.5, 0.95, None).unwrap(), Some(16));
        assert_eq!(required_cases(0.20, 0.5, 0.95, None).unwrap(), Some(12));
        assert_eq!(required_cases(0.40, 0.5, 0.95, None).unwrap(), Some(9));
        assert_eq!(required_cases(0.01, 0.5, 0.90, None).unwrap(), Some(11));
        assert_eq!(required_cases(0.01, 0.5, 0.80, None).unwrap(), Some(7));
        // ten trials can never support reliability at π₀ = 0.01
        assert_eq!(required_cases(0.01, 0.5, 0.95, Some(10)).unwrap(), None);
    }

    #[test]
    fn degenerate_assessment_flags() {
        struct Point;
        impl RateSummary<f64> for Point {
            fn median(&self) -> Result<f64> { Ok(0.5) }
            fn interval(&self, _: f64) -> Result<(f64, f64)> { Ok((0.5, 0.5)) }
            fn has_opposite(&self) -> bool { true }
        }
        let a = ReliabilityAssessment::of(&Point, 0.95).unwrap();
        assert!(a.degenerate && a.reliable && a.relative_precision.is_infinite());
        assert_eq!(a.reliability_level, LEVEL_CEIL);
    }

    #[test]
    fn f32_assessment() {
        let p = ConjugatePosterior::<f32>::beta(16.5, 1633.5).unwrap();
        assert!(is_reliable(&p, 0.95).unwrap());
    }
}
