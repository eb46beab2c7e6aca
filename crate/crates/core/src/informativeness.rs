//! Prior-case equivalents of CAR model specifications.
//!
//! For a logit-normal CAR model with linear predictor `L`, non-spatial variance
//! `σ²`, spatial variance `τ²` and `m` neighbors, the prior behaves like a beta prior
//! carrying roughly
//!
//! ```text
//! â = (1 + e^L) / (σ² + (σ² + τ²)/m) − e^L / (1 + e^L)
//! ```
//!
//! prior cases. The baseline `â₀` evaluates the same expression at the average
//! covariate vector and a reference neighbor count `m₀`. The log-normal (Poisson)
//! analogue is `1 / (exp(σ² + (σ² + τ²)/m) − 1)`.

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::{lit, Real};

/// Reference neighbor count for cross-dataset comparisons.
pub const DEFAULT_M0: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoInputs<F> {
    /// `xᵀβ`; the intercept `β₀` for intercept-only models.
    pub linear_predictor: F,
    pub sigma2: F,
    pub tau2: F,
    pub m: u32,
}

impl<F: Real> InfoInputs<F> {
    pub fn new(linear_predictor: F, sigma2: F, tau2: F, m: u32) -> Self {
        InfoInputs { linear_predictor, sigma2, tau2, m }
    }

    /// `σ² + (σ² + τ²)/m`, the conditional variance of the logit given the neighbors.
    pub fn conditional_variance(&self) -> Result<F> {
        if self.m == 0 {
            return Err(Error::invalid("neighbor count must be at least 1"));
        }
        if self.sigma2 < F::zero() || self.tau2 < F::zero() {
            return Err(Error::invalid("variances must be non-negative"));
        }
        Ok(self.sigma2 + (self.sigma2 + self.tau2) / lit(self.m as f64))
    }
}

/// Binomial (logit-normal) prior-case equivalent.
pub fn a_hat_binomial<F: Real>(inputs: &InfoInputs<F>) -> Result<F> {
    let v = inputs.conditional_variance()?;
    if !(v > F::zero()) {
        return Err(Error::UndefinedInformativeness("zero conditional variance"));
    }
    let e = inputs.linear_predictor.exp();
    if e.is_infinite() {
        return Err(Error::UndefinedInformativeness("linear predictor overflows"));
    }
    Ok((F::one() + e) / v - e / (F::one() + e))
}

/// Poisson (log-normal) prior-case equivalent.
pub fn a_hat_poisson<F: Real>(inputs: &InfoInputs<F>) -> Result<F> {
    let v = inputs.conditional_variance()?;
    let denom = v.exp_m1();
    if !(denom > F::zero()) {
        return Err(Error::UndefinedInformativeness("zero conditional variance"));
    }
    Ok(F::one() / denom)
}

/// Column means of a covariate matrix given as rows; this is `x₀`.
pub fn mean_covariates<F: Real>(rows: &[Vec<F>]) -> Result<Vec<F>> {
    let first = rows.first().ok_or_else(|| Error::invalid("no covariate rows"))?;
    let p = first.len();
    let mut acc = vec![F::zero(); p];
    for row in rows {
        if row.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: row.len() });
        }
        for (a, &x) in acc.iter_mut().zip(row) {
            *a = *a + x;
        }
    }
    let count = lit::<F>(rows.len() as f64);
    Ok(acc.into_iter().map(|a| a / count).collect())
}

pub fn linear_predictor<F: Real>(x: &[F], beta: &[F]) -> Result<F> {
    if x.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: beta.len(), found: x.len() });
    }
    Ok(x.iter().zip(beta).fold(F::zero(), |acc, (&xi, &bi)| acc + xi * bi))
}

/// Median and equal-tailed 95% interval of a set of `â₀` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A0Summary {
    pub median: f64,
    pub low: f64,
    pub high: f64,
    pub max: f64,
    pub draws: usize,
}

impl A0Summary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("no draws to summarize"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(A0Summary {
            median: crate::summary::type7_quantile(&sorted, 0.5),
            low: crate::summary::type7_quantile(&sorted, 0.025),
            high: crate::summary::type7_quantile(&sorted, 0.975),
            max: *sorted.last().unwrap(),
            draws: sorted.len(),
        })
    }
}

/// `â₀` of every retained draw, evaluated at `(β₀, σ², τ², m₀)`.
pub fn a0_trace(draws: &PosteriorDraws, m0: u32) -> Result<Vec<f64>> {
    draws
        .beta0
        .iter()
        .zip(&draws.sigma2)
        .zip(&draws.tau2)
        .map(|((&b, &s), &t)| a_hat_binomial(&InfoInputs::new(b, s, t, m0)))
        .collect()
}

pub fn a0_posterior_summary(draws: &PosteriorDraws, m0: u32) -> Result<A0Summary> {
    A0Summary::from_values(&a0_trace(draws, m0)?)
}
