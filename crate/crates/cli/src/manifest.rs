use serde::{Deserialize, Serialize};

use relirate::sampler::StallCounts;
use relirate::ModelConfig;

pub const SEED_RULE: &str =
    "chain seed = seed XOR big-endian u64 of the first 8 bytes of SHA-256(\"<stratum>|<year>\")";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub stratum: String,
    pub year: i32,
    pub seed: u64,
    pub data_hash: String,
    pub draws: usize,
    pub acceptance_min: f64,
    pub acceptance_mean: f64,
    pub acceptance_max: f64,
    pub stalls: StallCounts,
    /// Constrained draws taken by the exact truncated fallback.
    pub truncated_draws: StallCounts,
    pub a0_max: f64,
    pub zero_trial_regions: Vec<String>,
    pub draws_file: Option<String>,
    pub wall_clock_seconds: f64,
}

/// Everything needed to rerun a `fit` bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub model: String,
    pub level: f64,
    /// Base configuration; each chain replaces `seed` by its derived seed.
    pub config: ModelConfig,
    pub seed_rule: String,
    pub quantile_estimator: String,
    pub counts: InputFile,
    pub edges: InputFile,
    pub graph_hash: String,
    pub regions: usize,
    pub threads: usize,
    pub chains: Vec<ChainRecord>,
    pub wall_clock_seconds: f64,
}
