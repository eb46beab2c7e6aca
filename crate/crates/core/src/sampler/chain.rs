use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use sha2::{Digest, Sha256};

use super::adapt::adapt_proposals;
use super::truncated::{inverse_gamma_above, normal_between};
use super::{Aligned, DrawsMeta, ModelConfig, PosteriorDraws, StallCounts, VariancePrior};
use crate::error::{Error, Result};
use crate::graph::{hex, AdjacencyGraph};
use crate::informativeness::{a_hat_binomial, InfoInputs};

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Sampler state in canonical (id-sorted) region order.
struct Chain<'c> {
    cfg: &'c ModelConfig,
    y: Vec<f64>,
    n: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
    component: Vec<usize>,
    n_components: usize,
    pinned: Vec<bool>,
    free_count: f64,

    eta: Vec<f64>,
    z: Vec<f64>,
    beta0: f64,
    sigma2: f64,
    tau2: f64,

    scales: Vec<f64>,
    window_accepts: Vec<usize>,
    kept_accepts: Vec<usize>,
    stalls: StallCounts,
    truncated: StallCounts,
    rng: ChaCha8Rng,
}

enum Draw {
    Value(f64),
    /// Taken by the exact fallback.
    Fallback(f64),
    Stall,
}

impl Draw {
    /// Applies the draw to `slot`, tallying fallbacks and stalls when `counting`.
    fn apply(self, slot: &mut f64, counting: bool, truncated: &mut usize, stalls: &mut usize) -> bool {
        match self {
            Draw::Value(v) => *slot = v,
            Draw::Fallback(v) => {
                *slot = v;
                *truncated += counting as usize;
            }
            Draw::Stall => {
                *stalls += counting as usize;
                return false;
            }
        }
        true
    }
}

impl<'c> Chain<'c> {
    fn new(aligned: &Aligned<'_>, graph: &AdjacencyGraph, order: &[usize], cfg: &'c ModelConfig) -> Result<Self> {
        let k = order.len();
        let mut rank = vec![0; k];
        for (c, &g) in order.iter().enumerate() {
            rank[g] = c;
        }
        let neighbors: Vec<Vec<usize>> = order
            .iter()
            .map(|&g| {
                let mut nb: Vec<usize> = graph.neighbors(g).iter().map(|&j| rank[j]).collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        // component labels relabelled in order of first appearance
        let mut relabel = vec![usize::MAX; graph.n_components()];
        let mut next = 0;
        let component: Vec<usize> = order
            .iter()
            .map(|&g| {
                let c = graph.component(g);
                if relabel[c] == usize::MAX {
                    relabel[c] = next;
                    next += 1;
                }
                relabel[c]
            })
            .collect();
        let pinned: Vec<bool> = neighbors.iter().map(Vec::is_empty).collect();
        let free_count = pinned.iter().filter(|p| !**p).count() as f64;

        let y: Vec<f64> = order.iter().map(|&g| aligned.records[g].events as f64).collect();
        let n: Vec<f64> = order.iter().map(|&g| aligned.records[g].trials as f64).collect();

        let (ys, ns) = (y.iter().sum::<f64>(), n.iter().sum::<f64>());
        let beta0 = logit((ys + 0.5) / (ns + 1.0));
        let eta = y.iter().zip(&n).map(|(&yi, &ni)| logit((yi + 0.5) / (ni + 1.0))).collect();
        let init = |p: &VariancePrior| match *p {
            VariancePrior::Fixed { value } => value,
            VariancePrior::InverseGamma { .. } => 0.1,
        };

        let mut chain = Chain {
            cfg,
            y,
            n,
            neighbors,
            component,
            n_components: graph.n_components(),
            pinned,
            free_count,
            eta,
            z: vec![0.0; k],
            beta0,
            sigma2: init(&cfg.sigma2_prior),
            tau2: init(&cfg.tau2_prior),
            scales: vec![cfg.proposal_sd_init; k],
            window_accepts: vec![0; k],
            kept_accepts: vec![0; k],
            stalls: StallCounts::default(),
            truncated: StallCounts::default(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };
        chain.enter_constraint()?;
        Ok(chain)
    }

    fn a0(&self, beta0: f64, sigma2: f64, tau2: f64) -> f64 {
        a_hat_binomial(&InfoInputs::new(beta0, sigma2, tau2, self.cfg.baseline_m0)).unwrap_or(f64::INFINITY)
    }

    fn admissible(&self, beta0: f64, sigma2: f64, tau2: f64) -> bool {
        match self.cfg.restriction_bound {
            Some(bound) => self.a0(beta0, sigma2, tau2) < bound,
            None => true,
        }
    }

    // Inflates free variances until the starting point satisfies the bound.
    fn enter_constraint(&mut self) -> Result<()> {
        let Some(bound) = self.cfg.restriction_bound else { return Ok(()) };
        let sigma_free = matches!(self.cfg.sigma2_prior, VariancePrior::InverseGamma { .. });
        let tau_free = matches!(self.cfg.tau2_prior, VariancePrior::InverseGamma { .. });
        let mut doublings = 0;
        while !self.admissible(self.beta0, self.sigma2, self.tau2) {
            if (!sigma_free && !tau_free) || doublings >= 200 {
                return Err(Error::InfeasibleStart { bound });
            }
            if sigma_free {
                self.sigma2 *= 2.0;
            }
            if tau_free {
                self.tau2 *= 2.0;
            }
            doublings += 1;
        }
        Ok(())
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// `σ² + (σ² + τ²)/m₀` must exceed this for `â₀ < A` at intercept `beta0`.
    fn variance_threshold(&self, bound: f64, beta0: f64) -> f64 {
        (1.0 + beta0.exp()) / (bound + expit(beta0))
    }

    /// Admissible intercepts given the variances: with `u = 1 + e^β₀` the bound reads
    /// `u² − v(1 + A)u + v < 0`.
    fn beta0_window(&self, bound: f64, sigma2: f64, tau2: f64) -> Option<(f64, f64)> {
        let m = self.cfg.baseline_m0 as f64;
        let v = sigma2 + (sigma2 + tau2) / m;
        let half = 0.5 * v * (1.0 + bound);
        let disc = half * half - v;
        if !(disc > 0.0) {
            return None;
        }
        let r2 = half + disc.sqrt();
        let r1 = v / r2;
        if !(r2 > 1.0) {
            return None;
        }
        let lo = if r1 > 1.0 { (r1 - 1.0).ln() } else { f64::NEG_INFINITY };
        Some((lo, (r2 - 1.0).ln()))
    }

    /// Repeats `propose` until `ok` holds; after `max_rejections` failures tries the
    /// exact sampler `fallback`, and otherwise reports a stall.
    fn constrained(
        &mut self,
        mut propose: impl FnMut(&mut ChaCha8Rng) -> f64,
        ok: impl Fn(&Self, f64) -> bool,
        fallback: impl FnOnce(&Self, &mut ChaCha8Rng) -> Option<f64>,
    ) -> Draw {
        let restricted = self.cfg.restriction_bound.is_some();
        for _ in 0..self.cfg.max_rejections {
            let v = propose(&mut self.rng);
            if !restricted || ok(self, v) {
                return Draw::Value(v);
            }
        }
        if self.cfg.exact_truncation {
            let mut rng = self.rng.clone();
            let v = fallback(self, &mut rng);
            self.rng = rng;
            if let Some(v) = v.filter(|&v| ok(self, v)) {
                return Draw::Fallback(v);
            }
        }
        Draw::Stall
    }

    fn update_eta(&mut self) {
        let inv2s = 0.5 / self.sigma2;
        for i in 0..self.eta.len() {
            let mu = self.beta0 + self.z[i];
            let cur = self.eta[i];
            let prop = cur + self.scales[i] * self.normal();
            let log_target = |e: f64| self.y[i] * e - self.n[i] * softplus(e) - (e - mu).powi(2) * inv2s;
            let log_ratio = log_target(prop) - log_target(cur);
            let u: f64 = self.rng.random();
            if u.ln() < log_ratio {
                self.eta[i] = prop;
                self.window_accepts[i] += 1;
                self.kept_accepts[i] += 1;
            }
        }
    }

    // Gibbs sweep over z, then per-component centering with the shift moved into β₀.
    fn update_z(&mut self, counting: bool) {
        let mut zsum: f64 = (0..self.z.len()).filter(|&i| !self.pinned[i]).map(|i| self.z[i]).sum();
        for i in 0..self.z.len() {
            if self.pinned[i] {
                continue;
            }
            let m = self.neighbors[i].len() as f64;
            let nb_sum: f64 = self.neighbors[i].iter().map(|&j| self.z[j]).sum();
            let precision = m / self.tau2 + 1.0 / self.sigma2;
            let mean = (nb_sum / self.tau2 + (self.eta[i] - self.beta0) / self.sigma2) / precision;
            let sd = precision.sqrt().recip();
            let old = self.z[i];
            let rest = zsum - old;
            let draw = self.constrained(
                |rng| mean + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
                |c, v| c.admissible(c.beta0 + (rest + v) / c.free_count, c.sigma2, c.tau2),
                |c, rng| {
                    let (lo, hi) = c.beta0_window(c.cfg.restriction_bound?, c.sigma2, c.tau2)?;
                    let f = c.free_count;
                    normal_between(rng, mean, sd, f * (lo - c.beta0) - rest, f * (hi - c.beta0) - rest)
                },
            );
            let mut v = old;
            if draw.apply(&mut v, counting, &mut self.truncated.z, &mut self.stalls.z) {
                self.z[i] = v;
                zsum = rest + v;
            }
        }
        let mut sums = vec![0.0; self.n_components];
        let mut counts = vec![0usize; self.n_components];
        for i in 0..self.z.len() {
            if !self.pinned[i] {
                sums[self.component[i]] += self.z[i];
                counts[self.component[i]] += 1;
            }
        }
        for i in 0..self.z.len() {
            if !self.pinned[i] {
                let c = self.component[i];
                self.z[i] -= sums[c] / counts[c] as f64;
            }
        }
        self.beta0 += sums.iter().sum::<f64>() / self.free_count;
    }

    fn update_beta0(&mut self, counting: bool) {
        let k = self.eta.len() as f64;
        let mean = self.eta.iter().zip(&self.z).map(|(e, z)| e - z).sum::<f64>() / k;
        let sd = (self.sigma2 / k).sqrt();
        let draw = self.constrained(
            |rng| mean + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            |c, v| c.admissible(v, c.sigma2, c.tau2),
            |c, rng| {
                let (lo, hi) = c.beta0_window(c.cfg.restriction_bound?, c.sigma2, c.tau2)?;
                normal_between(rng, mean, sd, lo, hi)
            },
        );
        draw.apply(&mut self.beta0, counting, &mut self.truncated.beta0, &mut self.stalls.beta0);
    }

    fn update_sigma2(&mut self, counting: bool) -> Result<()> {
        let VariancePrior::InverseGamma { shape, scale } = self.cfg.sigma2_prior else { return Ok(()) };
        let ss: f64 = (0..self.eta.len()).map(|i| (self.eta[i] - self.beta0 - self.z[i]).powi(2)).sum();
        let (a, b) = (shape + 0.5 * self.eta.len() as f64, scale + 0.5 * ss);
        let ig = InverseGamma::new(a, b)?;
        let draw = self.constrained(
            |rng| ig.sample(rng),
            |c, v| c.admissible(c.beta0, v, c.tau2),
            |c, rng| {
                let m = c.cfg.baseline_m0 as f64;
                let v_min = c.variance_threshold(c.cfg.restriction_bound?, c.beta0);
                inverse_gamma_above(rng, a, b, (v_min - c.tau2 / m) / (1.0 + 1.0 / m))
            },
        );
        draw.apply(&mut self.sigma2, counting, &mut self.truncated.sigma2, &mut self.stalls.sigma2);
        Ok(())
    }

    fn update_tau2(&mut self, counting: bool) -> Result<()> {
        let VariancePrior::InverseGamma { shape, scale } = self.cfg.tau2_prior else { return Ok(()) };
        let mut q = 0.0;
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb.iter().filter(|&&j| j > i) {
                q += (self.z[i] - self.z[j]).powi(2);
            }
        }
        let dof = (self.eta.len() - self.n_components) as f64;
        let (a, b) = (shape + 0.5 * dof, scale + 0.5 * q);
        let ig = InverseGamma::new(a, b)?;
        let draw = self.constrained(
            |rng| ig.sample(rng),
            |c, v| c.admissible(c.beta0, c.sigma2, v),
            |c, rng| {
                let m = c.cfg.baseline_m0 as f64;
                let v_min = c.variance_threshold(c.cfg.restriction_bound?, c.beta0);
                inverse_gamma_above(rng, a, b, m * v_min - (m + 1.0) * c.sigma2)
            },
        );
        draw.apply(&mut self.tau2, counting, &mut self.truncated.tau2, &mut self.stalls.tau2);
        Ok(())
    }

    fn check_finite(&self, iteration: usize) -> Result<()> {
        let bad = |what: &str, v: f64| Error::NonFiniteState { iteration, detail: format!("{what} = {v}") };
        if !self.beta0.is_finite() {
            return Err(bad("beta0", self.beta0));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(bad("sigma2", self.sigma2));
        }
        if !(self.tau2.is_finite() && self.tau2 > 0.0) {
            return Err(bad("tau2", self.tau2));
        }
        if let Some(e) = self.eta.iter().find(|e| !e.is_finite()) {
            return Err(bad("eta", *e));
        }
        Ok(())
    }
}

/// `IG(shape, scale)` drawn as `scale / Gamma(shape, 1)`.
pub(crate) struct InverseGamma {
    gamma: Gamma<f64>,
    scale: f64,
}

impl InverseGamma {
    pub(crate) fn new(shape: f64, scale: f64) -> Result<Self> {
        let gamma = Gamma::new(shape, 1.0)
            .map_err(|e| Error::invalid(format!("inverse-gamma shape {shape}: {e}")))?;
        Ok(InverseGamma { gamma, scale })
    }
}

impl Distribution<f64> for InverseGamma {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale / self.gamma.sample(rng)
    }
}

fn data_hash(aligned: &Aligned<'_>) -> String {
    let mut rows: Vec<String> = aligned
        .records
        .iter()
        .map(|r| format!("{}\t{}\t{}", r.region_id, r.events, r.trials))
        .collect();
    rows.sort_unstable();
    let mut h = Sha256::new();
    h.update(format!("{}\t{}\n", aligned.stratum, aligned.year).as_bytes());
    for r in rows {
        h.update(r.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

pub(crate) fn run(aligned: &Aligned<'_>, graph: &AdjacencyGraph, cfg: &ModelConfig) -> Result<PosteriorDraws> {
    let k = graph.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| graph.id(a).cmp(graph.id(b)));

    let mut chain = Chain::new(aligned, graph, &order, cfg)?;
    let kept = cfg.retained();
    let mut pi = vec![Vec::with_capacity(kept); k];
    let mut z = vec![Vec::with_capacity(kept); k];
    let (mut beta0, mut sigma2, mut tau2, mut a0) =
        (Vec::with_capacity(kept), Vec::with_capacity(kept), Vec::with_capacity(kept), Vec::with_capacity(kept));

    for t in 1..=cfg.total_iterations {
        let counting = t > cfg.burn_in;
        if t == cfg.burn_in + 1 {
            chain.kept_accepts.iter_mut().for_each(|a| *a = 0);
        }
        chain.update_eta();
        chain.update_z(counting);
        chain.update_beta0(counting);
        chain.update_sigma2(counting)?;
        chain.update_tau2(counting)?;
        chain.check_finite(t)?;

        if !counting && t % cfg.adapt_window == 0 {
            adapt_proposals(&mut chain.scales, &mut chain.window_accepts, cfg.adapt_window);
        }
        if counting && (t - cfg.burn_in).is_multiple_of(cfg.thin) {
            for (c, &g) in order.iter().enumerate() {
                pi[g].push(expit(chain.eta[c]));
                z[g].push(chain.z[c]);
            }
            beta0.push(chain.beta0);
            sigma2.push(chain.sigma2);
            tau2.push(chain.tau2);
            a0.push(chain.a0(chain.beta0, chain.sigma2, chain.tau2));
        }
    }

    let post = (cfg.total_iterations - cfg.burn_in) as f64;
    let stall_rates = [
        ("beta0", chain.stalls.beta0 as f64 / post),
        ("sigma2", chain.stalls.sigma2 as f64 / post),
        ("tau2", chain.stalls.tau2 as f64 / post),
        ("z", chain.stalls.z as f64 / (post * chain.free_count.max(1.0))),
    ];
    if let Some(&(parameter, rate)) = stall_rates.iter().find(|(_, r)| *r > cfg.max_stall_rate) {
        return Err(Error::Stalled { parameter, rate });
    }

    let mut acceptance = vec![0.0; k];
    let mut proposal_sd = vec![0.0; k];
    for (c, &g) in order.iter().enumerate() {
        acceptance[g] = chain.kept_accepts[c] as f64 / post;
        proposal_sd[g] = chain.scales[c];
    }
    let zero_trial_regions = aligned
        .records
        .iter()
        .filter(|r| r.trials == 0)
        .map(|r| r.region_id.clone())
        .collect();

    Ok(PosteriorDraws {
        region_ids: graph.ids().to_vec(),
        events: aligned.records.iter().map(|r| r.events).collect(),
        trials: aligned.records.iter().map(|r| r.trials).collect(),
        pi,
        z,
        beta0,
        sigma2,
        tau2,
        a0_hat: a0,
        meta: DrawsMeta {
            stratum: aligned.stratum.clone(),
            year: aligned.year,
            config: cfg.clone(),
            graph_hash: graph.fingerprint(),
            data_hash: data_hash(aligned),
            acceptance,
            proposal_sd,
            stalls: chain.stalls,
            truncated: chain.truncated,
            zero_trial_regions,
            n_components: graph.n_components(),
        },
    })
}
