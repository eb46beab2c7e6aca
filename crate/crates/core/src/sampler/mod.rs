//! Metropolis-within-Gibbs for binomial-logit CAR models.
//!
//! For one stratum-year the target is
//!
//! ```text
//! Π_i Bin(y_i | n_i, expit η_i) · N(η_i | β₀ + z_i, σ²) · CAR(z | τ²) · IG(σ²) · IG(τ²)
//! ```
//!
//! with a flat prior on `β₀` and, for the restricted model, the indicator
//! `â₀(β₀, σ², τ², m₀) < A`. Each scan updates `η_i` by random-walk Metropolis on the
//! logit scale, `z_i`, `β₀`, `σ²` and `τ²` from their Gaussian / inverse-gamma full
//! conditionals. Under a restriction the Gibbs draws are repeated until they land inside
//! the admissible region, which samples the truncated conditionals exactly. Given the
//! other parameters the admissible set is an interval for `β₀` (and each `z_i`) and a
//! lower bound for `σ²` and `τ²`, so when rejection runs out of attempts the draw is
//! taken from the truncated conditional directly.
//!
//! Inverse-gamma priors are `IG(shape, scale)` with density `∝ x^(−shape−1) e^(−scale/x)`,
//! so the default `IG(1, 1/100)` on `σ²` has its mode at `1/200`.

mod adapt;
mod chain;
mod truncated;

use serde::{Deserialize, Serialize};

pub use adapt::{adapt_proposal_scale, adapt_proposals, TARGET_ACCEPTANCE};

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;
use crate::reliability::CountRecord;
use crate::summary::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariancePrior {
    InverseGamma { shape: f64, scale: f64 },
    /// Degenerate prior: the variance is held at this value.
    Fixed { value: f64 },
}

impl VariancePrior {
    pub fn inverse_gamma(shape: f64, scale: f64) -> Self {
        VariancePrior::InverseGamma { shape, scale }
    }

    pub fn fixed(value: f64) -> Self {
        VariancePrior::Fixed { value }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            VariancePrior::InverseGamma { shape, scale } => shape > 0.0 && scale > 0.0,
            VariancePrior::Fixed { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("{name} prior has non-positive parameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub sigma2_prior: VariancePrior,
    pub tau2_prior: VariancePrior,
    /// Upper bound `A` on `â₀`; `None` fits the standard model.
    pub restriction_bound: Option<f64>,
    pub baseline_m0: u32,
    pub proposal_sd_init: f64,
    /// Burn-in iterations between proposal-scale adjustments.
    pub adapt_window: usize,
    /// Consecutive constraint violations tolerated before falling back.
    pub max_rejections: usize,
    /// Fall back to an exact truncated draw; when off, the current value is kept
    /// and counted as a stall.
    pub exact_truncation: bool,
    /// Post-burn-in fraction of skipped draws at which the run is aborted.
    pub max_stall_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            total_iterations: 100_000,
            burn_in: 50_000,
            thin: 10,
            seed: 0,
            sigma2_prior: VariancePrior::inverse_gamma(1.0, 1.0 / 100.0),
            tau2_prior: VariancePrior::inverse_gamma(1.0, 1.0 / 7.0),
            restriction_bound: None,
            baseline_m0: crate::informativeness::DEFAULT_M0,
            proposal_sd_init: 0.5,
            adapt_window: 100,
            max_rejections: 1000,
            exact_truncation: true,
            max_stall_rate: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn restricted(bound: f64) -> Self {
        ModelConfig { restriction_bound: Some(bound), ..Default::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, total: usize, burn_in: usize, thin: usize) -> Self {
        self.total_iterations = total;
        self.burn_in = burn_in;
        self.thin = thin;
        self
    }

    /// Number of draws a run keeps.
    pub fn retained(&self) -> usize {
        (self.total_iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iterations {
            return Err(Error::invalid("burn-in must be shorter than the run"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning factor must be at least 1"));
        }
        if self.retained() == 0 {
            return Err(Error::invalid("configuration retains no draws"));
        }
        if let Some(a) = self.restriction_bound {
            if !(a > 0.0) {
                return Err(Error::invalid(format!("restriction bound must be positive, got {a}")));
            }
        }
        if self.baseline_m0 == 0 {
            return Err(Error::invalid("baseline neighbor count must be at least 1"));
        }
        if !(self.proposal_sd_init > 0.0) {
            return Err(Error::invalid("initial proposal sd must be positive"));
        }
        if self.adapt_window == 0 || self.max_rejections == 0 {
            return Err(Error::invalid("adapt window and rejection budget must be positive"));
        }
        self.sigma2_prior.validate("sigma2")?;
        self.tau2_prior.validate("tau2")
    }
}

/// Post-burn-in counts of constrained draws, per parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StallCounts {
    pub beta0: usize,
    pub sigma2: usize,
    pub tau2: usize,
    pub z: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub stratum: String,
    pub year: i32,
    pub config: ModelConfig,
    pub graph_hash: String,
    pub data_hash: String,
    /// Post-burn-in Metropolis acceptance rate per region.
    pub acceptance: Vec<f64>,
    /// Frozen proposal standard deviations per region.
    pub proposal_sd: Vec<f64>,
    pub stalls: StallCounts,
    /// Post-burn-in draws taken by the exact truncated fallback.
    pub truncated: StallCounts,
    pub zero_trial_regions: Vec<String>,
    pub n_components: usize,
}

/// Thinned draws of one chain. Region-indexed arrays follow the graph's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub region_ids: Vec<String>,
    pub events: Vec<u64>,
    pub trials: Vec<u64>,
    /// `pi[region][draw]`
    pub pi: Vec<Vec<f64>>,
    /// `z[region][draw]`
    pub z: Vec<Vec<f64>>,
    pub beta0: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub tau2: Vec<f64>,
    pub a0_hat: Vec<f64>,
    pub meta: DrawsMeta,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.beta0.len()
    }

    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.region_ids.iter().position(|r| r == id)
    }

    pub fn sample_set(&self, region: usize) -> Result<SampleSet<f64>> {
        SampleSet::new(self.pi[region].clone())
    }
}

/// Standard CAR model; `cfg.restriction_bound` must be unset.
pub fn fit_standard(data: &[CountRecord], graph: &AdjacencyGraph, cfg: &ModelConfig) -> Result<PosteriorDraws> {
    if cfg.restriction_bound.is_some() {
        return Err(Error::invalid("fit_standard called with a restriction bound"));
    }
    fit(data, graph, cfg)
}

/// Informativeness-restricted CAR model; `cfg.restriction_bound` must be set.
pub fn fit_restricted(data: &[CountRecord], graph: &AdjacencyGraph, cfg: &ModelConfig) -> Result<PosteriorDraws> {
    if cfg.restriction_bound.is_none() {
        return Err(Error::invalid("fit_restricted needs a restriction bound"));
    }
    fit(data, graph, cfg)
}

/// Fits whichever model `cfg` describes.
pub fn fit(data: &[CountRecord], graph: &AdjacencyGraph, cfg: &ModelConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let aligned = align(data, graph)?;
    chain::run(&aligned, graph, cfg)
}

pub(crate) struct Aligned<'a> {
    /// Record for each graph node, in graph order.
    pub records: Vec<&'a CountRecord>,
    pub stratum: String,
    pub year: i32,
}

fn align<'a>(data: &'a [CountRecord], graph: &AdjacencyGraph) -> Result<Aligned<'a>> {
    if data.len() != graph.len() {
        return Err(Error::DimensionMismatch { expected: graph.len(), found: data.len() });
    }
    if graph.len() < 2 {
        return Err(Error::invalid("model fitting needs at least two regions"));
    }
    let first = &data[0];
    let mut slots: Vec<Option<&CountRecord>> = vec![None; graph.len()];
    for rec in data {
        rec.validate()?;
        if rec.stratum != first.stratum || rec.year != first.year {
            return Err(Error::invalid(format!(
                "records mix stratum-years ({} {} vs {} {})",
                first.stratum, first.year, rec.stratum, rec.year
            )));
        }
        let i = graph.position(&rec.region_id).ok_or_else(|| Error::UnknownNode(rec.region_id.clone()))?;
        if slots[i].replace(rec).is_some() {
            return Err(Error::DuplicateNode(rec.region_id.clone()));
        }
    }
    Ok(Aligned {
        records: slots.into_iter().map(|s| s.expect("every slot filled")).collect(),
        stratum: first.stratum.clone(),
        year: first.year,
    })
}
