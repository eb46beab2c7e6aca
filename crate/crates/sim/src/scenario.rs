//! Scenario description, the binomial simulator and the `key = value` scenario file.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};

use relirate::{AdjacencyGraph, CountRecord, Error, Result};

use crate::{expit, pa};

#[derive(Debug, Clone, PartialEq)]
pub enum TrueRates {
    /// Rate per region in graph order.
    PerRegion(Vec<f64>),
    /// `logit π_i = β₀ + z_i + ε_i` with `z ~ CAR(τ²)` and `ε_i ~ N(0, σ²)`, drawn once.
    Generative { beta0: f64, sigma2: f64, tau2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trials {
    /// Trials per region in graph order, the same every year.
    Fixed(Vec<u64>),
    /// Poisson means per region, redrawn every year.
    Poisson(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub graph: AdjacencyGraph,
    pub stratum: String,
    pub years: Vec<i32>,
    pub rates: TrueRates,
    pub trials: Trials,
    /// Sd of fresh per-year noise on the log-odds; 0 keeps rates fixed across years.
    pub year_noise_sd: f64,
    /// `(region_id, factor)` pairs multiplying the region's rate.
    pub outliers: Vec<(String, f64)>,
    pub seed: u64,
}

impl SimScenario {
    /// Fixed rates and trials for one year.
    pub fn fixed(graph: AdjacencyGraph, rates: Vec<f64>, trials: Vec<u64>, seed: u64) -> Self {
        SimScenario {
            graph,
            stratum: "all".into(),
            years: vec![2019],
            rates: TrueRates::PerRegion(rates),
            trials: Trials::Fixed(trials),
            year_noise_sd: 0.0,
            outliers: Vec::new(),
            seed,
        }
    }

    pub fn uniform(graph: AdjacencyGraph, rate: f64, trials: u64, seed: u64) -> Self {
        let k = graph.len();
        Self::fixed(graph, vec![rate; k], vec![trials; k], seed)
    }

    fn validate(&self) -> Result<()> {
        let k = self.graph.len();
        if self.years.is_empty() {
            return Err(Error::invalid("scenario has no years"));
        }
        match &self.rates {
            TrueRates::PerRegion(r) => {
                if r.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, found: r.len() });
                }
                if let Some(p) = r.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
                    return Err(Error::invalid(format!("true rate {p} outside [0, 1]")));
                }
            }
            TrueRates::Generative { sigma2, tau2, beta0 } => {
                if !(*sigma2 >= 0.0 && *tau2 >= 0.0 && beta0.is_finite()) {
                    return Err(Error::invalid("generative hyperparameters must be finite and non-negative"));
                }
            }
        }
        let len = match &self.trials {
            Trials::Fixed(t) => t.len(),
            Trials::Poisson(m) => {
                if m.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::invalid("Poisson trial means must be finite and non-negative"));
                }
                m.len()
            }
        };
        if len != k {
            return Err(Error::DimensionMismatch { expected: k, found: len });
        }
        if !(self.year_noise_sd >= 0.0) {
            return Err(Error::invalid("year noise sd must be non-negative"));
        }
        for (id, f) in &self.outliers {
            if self.graph.position(id).is_none() {
                return Err(Error::UnknownNode(id.clone()));
            }
            if !(*f >= 0.0 && f.is_finite()) {
                return Err(Error::invalid(format!("outlier factor {f} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Simulated records with the rate that generated each one.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub records: Vec<CountRecord>,
    pub truth: Vec<f64>,
}

impl Simulated {
    pub fn year(&self, year: i32) -> (Vec<CountRecord>, Vec<f64>) {
        self.records.iter().zip(&self.truth).filter(|(r, _)| r.year == year).map(|(r, t)| (r.clone(), *t)).unzip()
    }
}

/// Draws `z ~ CAR(τ²)` by Gibbs sweeps from zero, centered per component.
pub fn sample_icar(graph: &AdjacencyGraph, tau2: f64, sweeps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = graph.len();
    let mut z = vec![0.0; k];
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..sweeps {
        for i in 0..k {
            let nb = graph.neighbors(i);
            if nb.is_empty() {
                continue;
            }
            let m = nb.len() as f64;
            let mean = nb.iter().map(|&j| z[j]).sum::<f64>() / m;
            z[i] = mean + (tau2 / m).sqrt() * std_normal.sample(rng);
        }
        graph.center_components(&mut z).expect("length matches");
    }
    z
}

pub fn simulate(s: &SimScenario) -> Result<Simulated> {
    s.validate()?;
    let k = s.graph.len();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let base: Vec<f64> = match &s.rates {
        TrueRates::PerRegion(r) => r.clone(),
        TrueRates::Generative { beta0, sigma2, tau2 } => {
            let z = sample_icar(&s.graph, *tau2, 200, &mut rng);
            let eps = Normal::new(0.0, sigma2.sqrt()).unwrap();
            z.iter().map(|zi| expit(beta0 + zi + eps.sample(&mut rng))).collect()
        }
    };
    let mut factor = vec![1.0; k];
    for (id, f) in &s.outliers {
        factor[s.graph.position(id).expect("validated")] = *f;
    }
    let noise = Normal::new(0.0, s.year_noise_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut records = Vec::with_capacity(k * s.years.len());
    let mut truth = Vec::with_capacity(k * s.years.len());
    for &year in &s.years {
        for i in 0..k {
            let n = match &s.trials {
                Trials::Fixed(t) => t[i],
                Trials::Poisson(m) if m[i] > 0.0 => {
                    Poisson::new(m[i]).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(&mut rng) as u64
                }
                Trials::Poisson(_) => 0,
            };
            let mut p = base[i];
            if s.year_noise_sd > 0.0 && p > 0.0 && p < 1.0 {
                p = expit(crate::logit(p) + noise.sample(&mut rng));
            }
            let p = (p * factor[i]).clamp(0.0, 1.0);
            let y = if n == 0 {
                0
            } else {
                Binomial::new(n, p).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(&mut rng)
            };
            records.push(CountRecord::new(s.graph.id(i), s.stratum.clone(), year, y, n)?);
            truth.push(p);
        }
    }
    Ok(Simulated { records, truth })
}

/// Parsed scenario file.
///
/// ```text
/// # PA-like Hispanic stratum, one year
/// seed = 7
/// profile = hispanic
/// years = 2019
/// outlier = 42071:2.0
/// ```
///
/// Without `profile`, rates come from `rate` (constant) or `beta0`/`sigma2`/`tau2`, and
/// trials from `trials`. `years` accepts a single year, `a-b`, or a comma list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub stratum: Option<String>,
    pub profile: Option<String>,
    pub years: Vec<i32>,
    pub rate: Option<f64>,
    pub beta0: Option<f64>,
    pub sigma2: Option<f64>,
    pub tau2: Option<f64>,
    pub trials: Option<u64>,
    pub outliers: Vec<(String, f64)>,
}

fn parse_years(v: &str) -> std::result::Result<Vec<i32>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| part)?, b.trim().parse().map_err(|_| part)?);
            if b < a {
                return Err(format!("empty year range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad year `{part}`"))?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig { years: vec![2019], ..Default::default() };
        let mut seen = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
            if key != "outlier" && seen.insert(key.to_owned(), line).is_some() {
                return Err(Error::Parse { line, message: format!("duplicate key `{key}`") });
            }
            let bad = |what: &str| Error::Parse { line, message: format!("invalid {what} `{value}`") };
            let real = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
            match key {
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "stratum" => cfg.stratum = Some(value.to_owned()),
                "profile" => {
                    if pa::profile(value).is_none() {
                        return Err(bad("profile (white, black, asian or hispanic)"));
                    }
                    cfg.profile = Some(value.to_owned())
                }
                "years" => cfg.years = parse_years(value).map_err(|m| Error::Parse { line, message: m })?,
                "rate" => cfg.rate = Some(real("rate")?),
                "beta0" => cfg.beta0 = Some(real("beta0")?),
                "sigma2" => cfg.sigma2 = Some(real("sigma2")?),
                "tau2" => cfg.tau2 = Some(real("tau2")?),
                "trials" => cfg.trials = Some(value.parse().map_err(|_| bad("trials"))?),
                "outlier" => {
                    let (id, f) = value.split_once(':').ok_or_else(|| bad("outlier (id:factor)"))?;
                    let f = f.trim().parse().map_err(|_| bad("outlier factor"))?;
                    cfg.outliers.push((id.trim().to_owned(), f));
                }
                other => return Err(Error::Parse { line, message: format!("unknown key `{other}`") }),
            }
        }
        Ok(cfg)
    }

    /// Builds the scenario on `graph`; a profile requires the bundled county graph.
    pub fn scenario(&self, graph: &AdjacencyGraph) -> Result<SimScenario> {
        if let Some(name) = &self.profile {
            let p = pa::profile(name).expect("validated on parse");
            let mut s = pa::scenario(&p, &self.years, self.seed)?;
            if s.graph.fingerprint() != graph.fingerprint() {
                return Err(Error::invalid("stratum profiles are defined on the bundled county graph only"));
            }
            s.outliers = self.outliers.clone();
            if let Some(st) = &self.stratum {
                s.stratum = st.clone();
            }
            return Ok(s);
        }
        let k = graph.len();
        let rates = match (self.rate, self.beta0, self.sigma2, self.tau2) {
            (Some(r), None, None, None) => TrueRates::PerRegion(vec![r; k]),
            (None, Some(beta0), Some(sigma2), Some(tau2)) => TrueRates::Generative { beta0, sigma2, tau2 },
            _ => return Err(Error::invalid("give either `rate` or all of `beta0`, `sigma2`, `tau2`")),
        };
        let trials = self.trials.ok_or_else(|| Error::invalid("`trials` is required without a profile"))?;
        Ok(SimScenario {
            graph: graph.clone(),
            stratum: self.stratum.clone().unwrap_or_else(|| "all".into()),
            years: self.years.clone(),
            rates,
            trials: Trials::Fixed(vec![trials; k]),
            year_noise_sd: 0.0,
            outliers: self.outliers.clone(),
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(k: usize) -> AdjacencyGraph {
        let ids: Vec<String> = (0..k).map(|i| format!("r{i}")).collect();
        let edges: Vec<(String, String)> = (1..k).map(|i| (ids[i - 1].clone(), ids[i].clone())).collect();
        AdjacencyGraph::build(&ids, &edges).unwrap()
    }

    #[test]
    fn zero_and_one_rates() {
        let zero = simulate(&SimScenario::uniform(path(5), 0.0, 40, 1)).unwrap();
        assert!(zero.records.iter().all(|r| r.events == 0));
        let one = simulate(&SimScenario::uniform(path(5), 1.0, 40, 1)).unwrap();
        assert!(one.records.iter().all(|r| r.events == r.trials));
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(simulate(&SimScenario::uniform(path(3), 1.5, 10, 0)).is_err());
        assert!(simulate(&SimScenario::fixed(path(3), vec![0.1; 2], vec![10; 3], 0)).is_err());
    }

    #[test]
    fn outlier_multiplies_rate() {
        let mut s = SimScenario::uniform(path(4), 0.1, 100, 2);
        s.outliers.push(("r2".into(), 2.0));
        let sim = simulate(&s).unwrap();
        assert!((sim.truth[2] - 0.2).abs() < 1e-15 && sim.truth[1] == 0.1);
    }

    #[test]
    fn same_seed_same_data() {
        let s = SimScenario {
            rates: TrueRates::Generative { beta0: -2.0, sigma2: 0.01, tau2: 0.2 },
            ..SimScenario::uniform(path(6), 0.1, 100, 9)
        };
        assert_eq!(simulate(&s).unwrap(), simulate(&s).unwrap());
    }

    #[test]
    fn icar_draw_sums_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = sample_icar(&path(10), 0.5, 50, &mut rng);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn config_parsing() {
        let cfg = ScenarioConfig::parse("seed = 3\n# c\nrate=0.2\ntrials = 50\nyears = 2010-2012, 2015\noutlier = r1:2\n").unwrap();
        assert_eq!(cfg.years, vec![2010, 2011, 2012, 2015]);
        assert_eq!(cfg.outliers, vec![("r1".to_string(), 2.0)]);
        let s = cfg.scenario(&path(3)).unwrap();
        assert_eq!(simulate(&s).unwrap().records.len(), 12);

        let err = ScenarioConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(ScenarioConfig::parse("colour = red\n").is_err());
        assert!(ScenarioConfig::parse("profile = martian\n").is_err());
        assert!(ScenarioConfig::parse("rate = 0.1\n").unwrap().scenario(&path(3)).is_err());
    }
}
