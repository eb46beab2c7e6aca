//! Reliability of small-area event rates.
//!
//! The crate covers three layers:
//!
//! * [`reliability`]: exact beta-binomial and gamma-Poisson posteriors, equal-tailed
//!   credible intervals, relative precision and continuous reliability levels.
//! * [`informativeness`]: the prior-case equivalents `â` of logit-normal and log-normal
//!   CAR models, used to budget how much a model may contribute relative to the data.
//! * [`graph`] and [`sampler`]: the intrinsic CAR prior on a contiguity graph and a
//!   Metropolis-within-Gibbs sampler for the standard and informativeness-restricted
//!   binomial-logit models, with [`summary`] turning draws into per-region assessments.
//!
//! The closed-form math is generic over the floating-point type through [`Real`];
//! the sampler works in `f64`. The aliases below fix the scalar for everyday use.

pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod informativeness;
pub mod reliability;
pub mod sampler;
pub mod special;
pub mod summary;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};
pub use graph::AdjacencyGraph;
pub use informativeness::{a_hat_binomial, a_hat_poisson, InfoInputs};
pub use reliability::{
    assess_conjugate, beta_posterior, equal_tailed_ci, gamma_posterior, is_reliable, max_prior_info,
    posterior_cv, prior_from_rate, relative_precision, reliability_level, required_cases,
    BetaPrior, ConjugatePosterior, CountRecord, Family, ReliabilityAssessment,
};
pub use sampler::{fit, fit_restricted, fit_standard, ModelConfig, PosteriorDraws, VariancePrior};
pub use summary::{assess_region, comparison_table, SampleSet};

/// Floating-point scalar accepted by the closed-form routines.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Lossless-enough conversion of an `f64` literal into `F`.
#[inline]
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("literal representable in target float")
}

pub type Posterior = ConjugatePosterior<f64>;
pub type Posterior32 = ConjugatePosterior<f32>;
pub type Prior = BetaPrior<f64>;
pub type Assessment = ReliabilityAssessment<f64>;
pub type Assessment32 = ReliabilityAssessment<f32>;
pub type Samples = SampleSet<f64>;
pub type Info = InfoInputs<f64>;
