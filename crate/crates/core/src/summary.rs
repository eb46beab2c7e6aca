//! Per-region reliability assessments from retained MCMC draws.

use crate::error::{Error, Result};
use crate::reliability::{RateSummary, ReliabilityAssessment};
use crate::sampler::PosteriorDraws;
use crate::{lit, Real};

/// Draw count below which an assessment is flagged as resting on few samples.
pub const MIN_ASSESSMENT_DRAWS: usize = 1000;

/// Hyndman-Fan type 7 quantile of an ascending slice.
pub fn type7_quantile<F: Real>(sorted: &[F], p: F) -> F {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = lit::<F>((n - 1) as f64) * p;
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0).min(n - 1);
    let j = (i + 1).min(n - 1);
    sorted[i] + (h - lo) * (sorted[j] - sorted[i])
}

/// Retained draws of one region's rate, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<F> {
    sorted: Vec<F>,
}

impl<F: Real> SampleSet<F> {
    pub fn new(mut draws: Vec<F>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::invalid("empty sample set"));
        }
        if let Some(bad) = draws.iter().find(|v| !(**v >= F::zero() && **v <= F::one())) {
            return Err(Error::invalid(format!("rate draw {bad} outside [0, 1]")));
        }
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(SampleSet { sorted: draws })
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_low_sample(&self) -> bool {
        self.sorted.len() < MIN_ASSESSMENT_DRAWS
    }

    pub fn quantile(&self, p: F) -> F {
        type7_quantile(&self.sorted, p)
    }

    pub fn sorted(&self) -> &[F] {
        &self.sorted
    }
}

impl<F: Real> RateSummary<F> for SampleSet<F> {
    fn median(&self) -> Result<F> {
        Ok(self.quantile(lit(0.5)))
    }

    fn interval(&self, level: F) -> Result<(F, F)> {
        if !(level > F::zero() && level < F::one()) {
            return Err(Error::invalid(format!("credibility level {level} outside (0, 1)")));
        }
        let tail = (F::one() - level) / lit(2.0);
        Ok((self.quantile(tail), self.quantile(F::one() - tail)))
    }

    fn has_opposite(&self) -> bool {
        true
    }
}

pub fn assess_region<F: Real>(s: &SampleSet<F>, level: F) -> Result<ReliabilityAssessment<F>> {
    ReliabilityAssessment::of(s, level)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAssessment {
    pub region_id: String,
    pub events: u64,
    pub trials: u64,
    pub assessment: ReliabilityAssessment<f64>,
    pub low_sample: bool,
}

impl RegionAssessment {
    pub fn crude_rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.events as f64 / self.trials as f64)
    }
}

/// Assessment of every region of a chain, in the chain's region order.
pub fn assess_draws(draws: &PosteriorDraws, level: f64) -> Result<Vec<RegionAssessment>> {
    (0..draws.n_regions())
        .map(|i| {
            let s = draws.sample_set(i)?;
            Ok(RegionAssessment {
                region_id: draws.region_ids[i].clone(),
                events: draws.events[i],
                trials: draws.trials[i],
                assessment: assess_region(&s, level)?,
                low_sample: s.is_low_sample(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub region_id: String,
    pub events: u64,
    pub trials: u64,
    pub crude_rate: Option<f64>,
    pub median_standard: f64,
    pub median_restricted: f64,
    pub rp_standard: f64,
    pub rp_restricted: f64,
    pub level_standard: f64,
    pub level_restricted: f64,
    pub reliable_standard: bool,
    pub reliable_restricted: bool,
}

/// Joins two assessments of the same regions, in the order of `standard`.
pub fn comparison_table(standard: &[RegionAssessment], restricted: &[RegionAssessment]) -> Result<Vec<ComparisonRow>> {
    if standard.len() != restricted.len() {
        return Err(Error::DimensionMismatch { expected: standard.len(), found: restricted.len() });
    }
    standard
        .iter()
        .map(|s| {
            let r = restricted
                .iter()
                .find(|r| r.region_id == s.region_id)
                .ok_or_else(|| Error::UnknownNode(s.region_id.clone()))?;
            if (r.events, r.trials) != (s.events, s.trials) {
                return Err(Error::invalid(format!("region `{}` has different counts in the two runs", s.region_id)));
            }
            Ok(ComparisonRow {
                region_id: s.region_id.clone(),
                events: s.events,
                trials: s.trials,
                crude_rate: s.crude_rate(),
                median_standard: s.assessment.median,
                median_restricted: r.assessment.median,
                rp_standard: s.assessment.relative_precision,
                rp_restricted: r.assessment.relative_precision,
                level_standard: s.assessment.reliability_level,
                level_restricted: r.assessment.reliability_level,
                reliable_standard: s.assessment.reliable,
                reliable_restricted: r.assessment.reliable,
            })
        })
        .collect()
}
