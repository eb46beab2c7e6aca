//! Pennsylvania-shaped synthetic data.
//!
//! County populations, urban flags and contiguity ship under `data/`. Births per
//! stratum are spread over counties in proportion to `population^concentration`, with
//! an extra multiplier on the five urban counties; the two constants per stratum were
//! calibrated so that the state-wide birth totals, preterm rates, urban/rural birth
//! ratios and the share of counties with fewer than ten preterm births land near the
//! published 2010-2019 Pennsylvania summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use relirate::graph::read_edge_list;
use relirate::{AdjacencyGraph, CountRecord, Result};

use crate::scenario::{simulate, SimScenario, Simulated, TrueRates, Trials};
use crate::{expit, logit};

pub const COUNTY_TABLE: &str = include_str!("../../../data/pa_counties.csv");
pub const ADJACENCY_TSV: &str = include_str!("../../../data/pa_adjacency.tsv");

pub const YEARS: std::ops::RangeInclusive<i32> = 2010..=2019;

#[derive(Debug, Clone, PartialEq)]
pub struct County {
    pub region_id: String,
    pub name: String,
    pub population: f64,
    pub urban: bool,
    pub lon: f64,
    pub lat: f64,
}

pub fn counties() -> Vec<County> {
    COUNTY_TABLE
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            County {
                region_id: f[0].to_owned(),
                name: f[1].to_owned(),
                population: f[2].parse().expect("bundled population"),
                urban: f[3] == "1",
                lon: f[4].parse().expect("bundled longitude"),
                lat: f[5].parse().expect("bundled latitude"),
            }
        })
        .collect()
}

pub fn graph() -> AdjacencyGraph {
    let ids: Vec<String> = counties().into_iter().map(|c| c.region_id).collect();
    let edges = read_edge_list(ADJACENCY_TSV.as_bytes()).expect("bundled adjacency parses");
    AdjacencyGraph::build(&ids, &edges).expect("bundled adjacency is consistent")
}

/// Per-stratum targets: yearly births, preterm rate, and the allocation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumProfile {
    pub name: &'static str,
    pub births_per_year: f64,
    pub rate: f64,
    pub concentration: f64,
    pub urban_multiplier: f64,
}

pub const WHITE: StratumProfile =
    StratumProfile { name: "white", births_per_year: 97_934.0, rate: 0.087, concentration: 0.94, urban_multiplier: 0.8196 };
pub const BLACK: StratumProfile =
    StratumProfile { name: "black", births_per_year: 19_848.0, rate: 0.132, concentration: 1.66, urban_multiplier: 2.0084 };
pub const ASIAN: StratumProfile =
    StratumProfile { name: "asian", births_per_year: 5_970.0, rate: 0.079, concentration: 2.20, urban_multiplier: 0.5778 };
pub const HISPANIC: StratumProfile =
    StratumProfile { name: "hispanic", births_per_year: 14_809.0, rate: 0.100, concentration: 2.59, urban_multiplier: 0.1155 };

pub const STRATA: [StratumProfile; 4] = [WHITE, BLACK, ASIAN, HISPANIC];

pub fn profile(name: &str) -> Option<StratumProfile> {
    STRATA.iter().copied().find(|p| p.name == name)
}

/// Spatial sd of county log-odds around the stratum rate.
const SPATIAL_SD: f64 = 0.15;
/// County-year noise sd on the log-odds.
const NOISE_SD: f64 = 0.05;

impl StratumProfile {
    /// Expected births per county and year, in the order of `counties`.
    pub fn expected_births(&self, counties: &[County]) -> Vec<f64> {
        let w: Vec<f64> = counties
            .iter()
            .map(|c| c.population.powf(self.concentration) * if c.urban { self.urban_multiplier } else { 1.0 })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|wi| self.births_per_year * wi / total).collect()
    }
}

/// Smooth zero-mean field on the graph with marginal sd close to `sd`.
pub fn smooth_field(graph: &AdjacencyGraph, sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let raw: Vec<f64> = (0..graph.len()).map(|_| std_normal.sample(rng)).collect();
    let mut field: Vec<f64> = (0..graph.len())
        .map(|i| {
            let nb = graph.neighbors(i);
            (raw[i] + nb.iter().map(|&j| raw[j]).sum::<f64>()) / ((1 + nb.len()) as f64)
        })
        .collect();
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let var = field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / field.len() as f64;
    let scale = if var > 0.0 { sd / var.sqrt() } else { 0.0 };
    field.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    field
}

/// Scenario for one stratum on the bundled county graph.
pub fn scenario(profile: &StratumProfile, years: &[i32], seed: u64) -> Result<SimScenario> {
    let g = graph();
    // The field gets its own stream so it does not shift with the number of years.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_a5a5_0f0f_f0f0);
    let field = smooth_field(&g, SPATIAL_SD, &mut rng);
    let base = logit(profile.rate);
    Ok(SimScenario {
        stratum: profile.name.to_owned(),
        years: years.to_vec(),
        rates: TrueRates::PerRegion(field.iter().map(|f| expit(base + f)).collect()),
        trials: Trials::Poisson(profile.expected_births(&counties())),
        year_noise_sd: NOISE_SD,
        outliers: Vec::new(),
        seed,
        graph: g,
    })
}

/// One stratum over `years` on the bundled county graph.
pub fn simulate_stratum(profile: &StratumProfile, years: &[i32], seed: u64) -> Result<Simulated> {
    simulate(&scenario(profile, years, seed)?)
}

/// The bundled fixture: 67 counties × 4 strata × 10 years.
pub fn fixture(seed: u64) -> Result<Vec<CountRecord>> {
    let years: Vec<i32> = YEARS.collect();
    let mut all = Vec::new();
    for (k, p) in STRATA.iter().enumerate() {
        all.extend(simulate_stratum(p, &years, seed.wrapping_add(k as u64 * 1_000_003))?.records);
    }
    Ok(all)
}
