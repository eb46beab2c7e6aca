//! Synthetic data and brute-force reference computations for `relirate`.
//!
//! Nothing here calls the code it is used to check: conjugate assessments are
//! recomputed by integrating the beta density, and small CAR posteriors by nested
//! quadrature over the log-odds.

pub mod aggregate;
pub mod ks;
pub mod pa;
pub mod quadrature;
pub mod scenario;

pub use aggregate::{aggregation_experiment, AggregationRow};
pub use ks::{ks_one_sample, ks_two_sample, KsResult};
pub use quadrature::{exact_conjugate_oracle, quadrature_posterior_2node, OracleAssessment, TwoNodeMoments};
pub use scenario::{simulate, ScenarioConfig, SimScenario, Simulated, TrueRates, Trials};

pub(crate) fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
