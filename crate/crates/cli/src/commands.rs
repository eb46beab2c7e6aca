//! Command implementations shared by the binary and the tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use relirate::graph::read_edge_list;
use relirate::informativeness::{a0_posterior_summary, A0Summary};
use relirate::reliability::assess_conjugate;
use relirate::summary::{assess_draws, comparison_table, RegionAssessment};
use relirate::{
    a_hat_binomial, fit, prior_from_rate, AdjacencyGraph, Assessment, BetaPrior, CountRecord, Info, ModelConfig,
    PosteriorDraws,
};
use relirate_sim::{aggregation_experiment, pa, simulate, ScenarioConfig};

use crate::error::{CliError, CliResult};
use crate::io::{self, A0Row, AggregationCsvRow, AssessRow, ComparisonCsvRow, Dataset, SummaryRow, SUMMARY_HEADER};
use crate::manifest::{ChainRecord, InputFile, RunManifest, SEED_RULE};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-chain seed: the run seed XOR the leading 8 bytes of `SHA-256("stratum|year")`.
pub fn chain_seed(seed: u64, stratum: &str, year: i32) -> u64 {
    let h = Sha256::digest(format!("{stratum}|{year}").as_bytes());
    seed ^ u64::from_be_bytes(h[..8].try_into().unwrap())
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Graph over the edge-file nodes plus any region that only appears in the counts.
pub fn load_graph(edges: &Path, extra_nodes: &BTreeSet<&str>) -> CliResult<AdjacencyGraph> {
    let bytes = read_file(edges)?;
    let list = read_edge_list(bytes.as_slice()).map_err(|e| match e {
        relirate::Error::Parse { line, message } => CliError::Input { path: edges.display().to_string(), line: line as u64, message },
        other => other.into(),
    })?;
    let mut nodes: BTreeSet<&str> = extra_nodes.clone();
    for (a, b) in &list {
        nodes.insert(a);
        nodes.insert(b);
    }
    let nodes: Vec<&str> = nodes.into_iter().collect();
    let pairs: Vec<(&str, &str)> = list.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    Ok(AdjacencyGraph::build(&nodes, &pairs)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Standard,
    Restricted,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Standard => "standard",
            ModelKind::Restricted => "restricted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub counts: PathBuf,
    pub edges: PathBuf,
    pub model: ModelKind,
    pub a0_max: f64,
    pub m0: u32,
    pub level: f64,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub strata: Vec<String>,
    pub years: Vec<i32>,
    pub write_draws: bool,
    pub exact_truncation: bool,
}

impl FitOptions {
    pub fn base_config(&self) -> ModelConfig {
        let mut cfg = ModelConfig::default().with_iterations(self.iters, self.burnin, self.thin).with_seed(self.seed);
        cfg.baseline_m0 = self.m0;
        cfg.exact_truncation = self.exact_truncation;
        if self.model == ModelKind::Restricted {
            cfg.restriction_bound = Some(self.a0_max);
        }
        cfg
    }
}

pub struct FitOutcome {
    pub summary: Vec<SummaryRow>,
    pub a0: Vec<A0Row>,
    pub manifest: RunManifest,
}

struct ChainResult {
    draws: PosteriorDraws,
    assessments: Vec<RegionAssessment>,
    a0: A0Summary,
    seconds: f64,
}

fn file_stem(stratum: &str, year: i32, model: &str) -> String {
    let clean: String = stratum.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("{clean}_{year}_{model}")
}

pub fn run_fit(opts: &FitOptions) -> CliResult<FitOutcome> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(CliError::Validation(format!("--level {} outside (0, 1)", opts.level)));
    }
    let started = Instant::now();
    let counts_bytes = read_file(&opts.counts)?;
    let data = io::read_counts_from(counts_bytes.as_slice(), &opts.counts.display().to_string())?;
    let graph = load_graph(&opts.edges, &data.regions())?;
    let base = opts.base_config();
    base.validate()?;

    let groups: Vec<((String, i32), Vec<CountRecord>)> = data
        .groups()
        .into_iter()
        .filter(|((s, y), _)| (opts.strata.is_empty() || opts.strata.contains(s)) && (opts.years.is_empty() || opts.years.contains(y)))
        .collect();
    if groups.is_empty() {
        return Err(CliError::Validation("no stratum-year matches the selection".into()));
    }
    for ((s, y), recs) in &groups {
        if recs.len() != graph.len() {
            let have: BTreeSet<&str> = recs.iter().map(|r| r.region_id.as_str()).collect();
            let missing: Vec<&str> = graph.ids().iter().map(String::as_str).filter(|id| !have.contains(id)).take(5).collect();
            return Err(CliError::Validation(format!(
                "stratum `{s}` year {y} has {} of {} regions; missing e.g. {}",
                recs.len(),
                graph.len(),
                missing.join(", ")
            )));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<ChainResult>> = pool.install(|| {
        groups
            .par_iter()
            .map(|((s, y), recs)| {
                let t = Instant::now();
                let cfg = base.clone().with_seed(chain_seed(opts.seed, s, *y));
                let draws = fit(recs, &graph, &cfg)?;
                let assessments = assess_draws(&draws, opts.level)?;
                let a0 = a0_posterior_summary(&draws, opts.m0)?;
                Ok(ChainResult { draws, assessments, a0, seconds: t.elapsed().as_secs_f64() })
            })
            .collect()
    });

    let model = opts.model.name();
    if opts.write_draws {
        fs::create_dir_all(opts.out.join("draws")).map_err(|e| CliError::io(&opts.out, e))?;
    } else {
        fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    }
    let mut summary = Vec::new();
    let mut a0_rows = Vec::new();
    let mut chains = Vec::new();
    for (((stratum, year), _), res) in groups.iter().zip(results) {
        let res = res.map_err(|e| match e {
            CliError::Diagnostic(m) => CliError::Diagnostic(format!("stratum `{stratum}` year {year}: {m}")),
            CliError::Validation(m) => CliError::Validation(format!("stratum `{stratum}` year {year}: {m}")),
            other => other,
        })?;
        let mut rows: Vec<&RegionAssessment> = res.assessments.iter().collect();
        rows.sort_by(|a, b| a.region_id.cmp(&b.region_id));
        for r in rows {
            summary.push(summary_row(r, stratum, *year, model));
        }
        let source = format!("{stratum}|{year}|{model}");
        a0_rows.push(A0Row {
            source,
            m0: opts.m0,
            draws: res.a0.draws,
            a0_median: res.a0.median,
            a0_q025: res.a0.low,
            a0_q975: res.a0.high,
            a0_max: res.a0.max,
        });
        let draws_file = if opts.write_draws {
            let rel = format!("draws/{}.csv", file_stem(stratum, *year, model));
            let mut buf = Vec::new();
            io::write_draws(&mut buf, &res.draws)?;
            write_file(&opts.out.join(&rel), &buf)?;
            Some(rel)
        } else {
            None
        };
        let acc = &res.draws.meta.acceptance;
        chains.push(ChainRecord {
            stratum: stratum.clone(),
            year: *year,
            seed: res.draws.meta.config.seed,
            data_hash: res.draws.meta.data_hash.clone(),
            draws: res.draws.n_draws(),
            acceptance_min: acc.iter().cloned().fold(f64::INFINITY, f64::min),
            acceptance_mean: acc.iter().sum::<f64>() / acc.len() as f64,
            acceptance_max: acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            stalls: res.draws.meta.stalls.clone(),
            truncated_draws: res.draws.meta.truncated.clone(),
            a0_max: res.draws.a0_hat.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            zero_trial_regions: res.draws.meta.zero_trial_regions.clone(),
            draws_file,
            wall_clock_seconds: res.seconds,
        });
    }

    let mut buf = Vec::new();
    io::write_rows_with_header(&mut buf, &SUMMARY_HEADER, &summary)?;
    write_file(&opts.out.join("summary.csv"), &buf)?;
    let mut buf = Vec::new();
    io::write_rows(&mut buf, &a0_rows)?;
    write_file(&opts.out.join("a0_summary.csv"), &buf)?;

    let edges_bytes = read_file(&opts.edges)?;
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        model: model.into(),
        level: opts.level,
        config: base,
        seed_rule: SEED_RULE.into(),
        quantile_estimator: "type 7 (linear interpolation)".into(),
        counts: InputFile { path: opts.counts.display().to_string(), sha256: sha256_hex(&counts_bytes) },
        edges: InputFile { path: opts.edges.display().to_string(), sha256: sha256_hex(&edges_bytes) },
        graph_hash: graph.fingerprint(),
        regions: graph.len(),
        threads: opts.threads,
        chains,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_file(&opts.out.join("manifest.json"), &json)?;
    Ok(FitOutcome { summary, a0: a0_rows, manifest })
}

pub fn summary_row(r: &RegionAssessment, stratum: &str, year: i32, model: &str) -> SummaryRow {
    let a = &r.assessment;
    SummaryRow {
        region_id: r.region_id.clone(),
        stratum: stratum.into(),
        year,
        model: model.into(),
        events: r.events,
        trials: r.trials,
        crude_rate: r.crude_rate(),
        median: a.median,
        ci_low: a.ci_low,
        ci_high: a.ci_high,
        level: a.level_used,
        relative_precision: a.relative_precision,
        reliability_level: a.reliability_level,
        reliable: a.reliable,
        low_sample: r.low_sample,
    }
}

/// Conjugate assessment of every record with `a` prior cases at `prior_rate`, or at the
/// stratum's pooled crude rate when none is given.
pub fn run_assess(data: &Dataset, a: f64, prior_rate: Option<f64>, level: f64) -> CliResult<Vec<AssessRow>> {
    let mut pooled: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in &data.records {
        let e = pooled.entry(r.stratum.as_str()).or_default();
        e.0 += r.events;
        e.1 += r.trials;
    }
    let mut priors: BTreeMap<&str, BetaPrior<f64>> = BTreeMap::new();
    for (s, (y, n)) in pooled {
        let rate = match prior_rate {
            Some(p) => p,
            None if n > 0 && y > 0 && y < n => y as f64 / n as f64,
            None => {
                return Err(CliError::Validation(format!(
                    "stratum `{s}` has a degenerate pooled rate; pass --prior-rate"
                )))
            }
        };
        priors.insert(s, prior_from_rate(rate, a)?);
    }
    let mut rows = Vec::with_capacity(data.len());
    let mut sorted: Vec<&CountRecord> = data.records.iter().collect();
    sorted.sort_by(|x, y| (&x.stratum, x.year, &x.region_id).cmp(&(&y.stratum, y.year, &y.region_id)));
    for r in sorted {
        let prior = priors[r.stratum.as_str()];
        let assessed: Option<Assessment> =
            if r.trials > 0 { Some(assess_conjugate(r, &prior, level)?) } else { None };
        rows.push(AssessRow {
            region_id: r.region_id.clone(),
            stratum: r.stratum.clone(),
            year: r.year,
            events: r.events,
            trials: r.trials,
            prior_cases: prior.prior_cases,
            prior_noncases: prior.prior_noncases,
            median: assessed.map(|x| x.median),
            ci_low: assessed.map(|x| x.ci_low),
            ci_high: assessed.map(|x| x.ci_high),
            level,
            relative_precision: assessed.map(|x| x.relative_precision),
            reliability_level: assessed.map(|x| x.reliability_level),
            reliable: assessed.is_some_and(|x| x.reliable),
        });
    }
    Ok(rows)
}

/// `â₀` summary of a draws dump, recomputed at baseline neighbor count `m0`.
pub fn run_info(path: &Path, m0: u32) -> CliResult<A0Row> {
    let t = io::read_draws(path)?;
    let (b, s, tau) = (t.column("beta0").unwrap(), t.column("sigma2").unwrap(), t.column("tau2").unwrap());
    let values: Vec<f64> = (0..b.len())
        .map(|k| a_hat_binomial(&Info::new(b[k], s[k], tau[k], m0)))
        .collect::<Result<_, _>>()?;
    let sm = A0Summary::from_values(&values)?;
    Ok(A0Row {
        source: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        m0,
        draws: sm.draws,
        a0_median: sm.median,
        a0_q025: sm.low,
        a0_q975: sm.high,
        a0_max: sm.max,
    })
}

fn to_assessment(r: &SummaryRow) -> RegionAssessment {
    RegionAssessment {
        region_id: r.region_id.clone(),
        events: r.events,
        trials: r.trials,
        assessment: Assessment {
            median: r.median,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            level_used: r.level,
            relative_precision: r.relative_precision,
            reliability_level: r.reliability_level,
            reliable: r.reliable,
            degenerate: r.relative_precision.is_infinite(),
        },
        low_sample: r.low_sample,
    }
}

/// Side-by-side table of a standard and a restricted summary, stratum-year by stratum-year.
pub fn run_compare(standard: &[SummaryRow], restricted: &[SummaryRow]) -> CliResult<Vec<ComparisonCsvRow>> {
    let group = |rows: &[SummaryRow]| {
        let mut g: BTreeMap<(String, i32), Vec<RegionAssessment>> = BTreeMap::new();
        for r in rows {
            g.entry((r.stratum.clone(), r.year)).or_default().push(to_assessment(r));
        }
        g
    };
    let (gs, gr) = (group(standard), group(restricted));
    if gs.keys().ne(gr.keys()) {
        return Err(CliError::Validation("the two summaries cover different stratum-years".into()));
    }
    let mut out = Vec::new();
    for ((stratum, year), s) in &gs {
        for c in comparison_table(s, &gr[&(stratum.clone(), *year)])? {
            out.push(ComparisonCsvRow {
                region_id: c.region_id,
                stratum: stratum.clone(),
                year: *year,
                events: c.events,
                trials: c.trials,
                crude_rate: c.crude_rate,
                median_standard: c.median_standard,
                median_restricted: c.median_restricted,
                rp_standard: c.rp_standard,
                rp_restricted: c.rp_restricted,
                level_standard: c.level_standard,
                level_restricted: c.level_restricted,
                reliable_standard: c.reliable_standard,
                reliable_restricted: c.reliable_restricted,
            });
        }
    }
    Ok(out)
}

pub struct GeoSelection {
    pub stratum: Option<String>,
    pub year: Option<i32>,
    pub model: Option<String>,
}

pub fn run_merge_geojson(
    summary_path: &Path,
    geojson_path: &Path,
    key: &str,
    select: &GeoSelection,
) -> CliResult<(Value, crate::geojson::MergeReport)> {
    let summary_bytes = read_file(summary_path)?;
    let rows: Vec<SummaryRow> = io::read_rows_from(summary_bytes.as_slice(), &summary_path.display().to_string())?;
    let rows: Vec<SummaryRow> = rows
        .into_iter()
        .filter(|r| select.stratum.as_ref().is_none_or(|s| *s == r.stratum))
        .filter(|r| select.year.is_none_or(|y| y == r.year))
        .filter(|r| select.model.as_ref().is_none_or(|m| *m == r.model))
        .collect();
    let collection: Value = serde_json::from_slice(&read_file(geojson_path)?)
        .map_err(|e| CliError::Input { path: geojson_path.display().to_string(), line: e.line() as u64, message: e.to_string() })?;
    let mut meta = Map::new();
    meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    meta.insert("summary_sha256".into(), json!(sha256_hex(&summary_bytes)));
    meta.insert("join_key".into(), json!(key));
    meta.insert("stratum".into(), json!(select.stratum));
    meta.insert("year".into(), json!(select.year));
    meta.insert("model".into(), json!(select.model));
    crate::geojson::merge(collection, &rows, key, meta)
}

/// Records from a scenario file, on the edge file's graph or the bundled county graph.
pub fn run_simulate(scenario: &Path, edges: Option<&Path>) -> CliResult<Vec<CountRecord>> {
    let text = fs::read_to_string(scenario).map_err(|e| CliError::io(scenario, e))?;
    let cfg = ScenarioConfig::parse(&text).map_err(|e| match e {
        relirate::Error::Parse { line, message } => CliError::Input { path: scenario.display().to_string(), line: line as u64, message },
        other => other.into(),
    })?;
    let graph = match edges {
        Some(p) => load_graph(p, &BTreeSet::new())?,
        None => pa::graph(),
    };
    Ok(simulate(&cfg.scenario(&graph)?)?.records)
}

pub fn run_aggregate(data: &Dataset, windows: &[usize], a0: f64, level: f64) -> CliResult<Vec<AggregationCsvRow>> {
    let mut out = Vec::new();
    for &w in windows {
        for r in aggregation_experiment(&data.records, w, a0, level)? {
            out.push(AggregationCsvRow {
                stratum: r.stratum,
                window_years: r.window_years,
                windows: r.windows,
                regions: r.regions,
                reliable_fraction: r.reliable_fraction,
            });
        }
    }
    Ok(out)
}
