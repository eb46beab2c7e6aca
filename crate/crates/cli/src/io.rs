//! CSV artifacts: counts in, summaries and draw dumps out.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use relirate::{CountRecord, PosteriorDraws};

use crate::error::{CliError, CliResult};

pub const COUNTS_HEADER: [&str; 5] = ["region_id", "stratum", "year", "events", "trials"];

/// Validated count records with unique `(region, stratum, year)` keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<CountRecord>,
}

impl Dataset {
    pub fn new(records: Vec<CountRecord>) -> CliResult<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert((r.region_id.as_str(), r.stratum.as_str(), r.year)) {
                return Err(CliError::Validation(format!(
                    "duplicate record for region `{}`, stratum `{}`, year {}",
                    r.region_id, r.stratum, r.year
                )));
            }
        }
        Ok(Dataset { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn strata(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.stratum.as_str()).collect()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.records.iter().map(|r| r.year).collect()
    }

    pub fn regions(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.region_id.as_str()).collect()
    }

    /// Records grouped by `(stratum, year)`, each group sorted by region.
    pub fn groups(&self) -> BTreeMap<(String, i32), Vec<CountRecord>> {
        let mut out: BTreeMap<(String, i32), Vec<CountRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry((r.stratum.clone(), r.year)).or_default().push(r.clone());
        }
        for v in out.values_mut() {
            v.sort_by(|a, b| a.region_id.cmp(&b.region_id));
        }
        out
    }
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn read_counts(path: &Path) -> CliResult<Dataset> {
    read_counts_from(open(path)?, &path.display().to_string())
}

/// Parses a counts CSV; `source` names the input in error messages.
pub fn read_counts_from<R: Read>(reader: R, source: &str) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let bad = |line: u64, message: String| CliError::Input { path: source.to_owned(), line, message };
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != COUNTS_HEADER {
        return Err(bad(1, format!("expected header `{}`", COUNTS_HEADER.join(","))));
    }
    let mut records = Vec::new();
    let mut first_seen: HashMap<(String, String, i32), u64> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            bad(line, format!("malformed row: {e}"))
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let count = |k: usize| -> CliResult<u64> {
            let v: i128 = row[k].parse().map_err(|_| bad(line, format!("{} `{}` is not an integer", COUNTS_HEADER[k], &row[k])))?;
            if v < 0 {
                return Err(bad(line, format!("negative {} {v}", COUNTS_HEADER[k])));
            }
            u64::try_from(v).map_err(|_| bad(line, format!("{} {v} is too large", COUNTS_HEADER[k])))
        };
        let year: i32 = row[2].parse().map_err(|_| bad(line, format!("year `{}` is not an integer", &row[2])))?;
        let (events, trials) = (count(3)?, count(4)?);
        if row[0].is_empty() || row[1].is_empty() {
            return Err(bad(line, "empty region_id or stratum".into()));
        }
        if events > trials {
            return Err(bad(line, format!("events {events} exceed trials {trials}")));
        }
        let key = (row[0].to_owned(), row[1].to_owned(), year);
        if let Some(prev) = first_seen.insert(key.clone(), line) {
            return Err(bad(line, format!("duplicate key ({}, {}, {}) first seen on line {prev}", key.0, key.1, key.2)));
        }
        records.push(CountRecord::new(key.0, key.1, year, events, trials)?);
    }
    Ok(Dataset { records })
}

pub fn write_counts<W: Write>(out: W, records: &[CountRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COUNTS_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([r.region_id.clone(), r.stratum.clone(), r.year.to_string(), r.events.to_string(), r.trials.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Validation(format!("csv: {e}"))
}

/// One row of the model summary table; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub region_id: String,
    pub stratum: String,
    pub year: i32,
    pub model: String,
    pub events: u64,
    pub trials: u64,
    pub crude_rate: Option<f64>,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub relative_precision: f64,
    pub reliability_level: f64,
    pub reliable: bool,
    pub low_sample: bool,
}

/// One row of the conjugate assessment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessRow {
    pub region_id: String,
    pub stratum: String,
    pub year: i32,
    pub events: u64,
    pub trials: u64,
    pub prior_cases: f64,
    pub prior_noncases: f64,
    pub median: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub level: f64,
    pub relative_precision: Option<f64>,
    pub reliability_level: Option<f64>,
    pub reliable: bool,
}

/// `â₀` summary of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A0Row {
    pub source: String,
    pub m0: u32,
    pub draws: usize,
    pub a0_median: f64,
    pub a0_q025: f64,
    pub a0_q975: f64,
    pub a0_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCsvRow {
    pub region_id: String,
    pub stratum: String,
    pub year: i32,
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationCsvRow {
    pub stratum: String,
    pub window_years: usize,
    pub windows: usize,
    pub regions: usize,
    pub reliable_fraction: f64,
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

/// Header-only output for an empty table needs the column names spelled out.
pub fn write_rows_with_header<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> CliResult<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header).map_err(csv_err)?;
        return w.flush().map_err(|e| CliError::io("<output>", e));
    }
    write_rows(out, rows)
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    read_rows_from(open(path)?, &path.display().to_string())
}

pub fn read_rows_from<R: Read, T: DeserializeOwned>(reader: R, source: &str) -> CliResult<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row.map_err(|e: csv::Error| CliError::Input {
            path: source.to_owned(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub const SUMMARY_HEADER: [&str; 15] = [
    "region_id",
    "stratum",
    "year",
    "model",
    "events",
    "trials",
    "crude_rate",
    "median",
    "ci_low",
    "ci_high",
    "level",
    "relative_precision",
    "reliability_level",
    "reliable",
    "low_sample",
];

/// Draws dump: `iteration,beta0,sigma2,tau2,a0_hat,pi_<region>...`, one row per retained draw.
pub fn write_draws<W: Write>(out: W, d: &PosteriorDraws) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iteration".to_owned(), "beta0".into(), "sigma2".into(), "tau2".into(), "a0_hat".into()];
    let mut order: Vec<usize> = (0..d.n_regions()).collect();
    order.sort_by(|&a, &b| d.region_ids[a].cmp(&d.region_ids[b]));
    header.extend(order.iter().map(|&i| format!("pi_{}", d.region_ids[i])));
    w.write_record(&header).map_err(csv_err)?;
    let cfg = &d.meta.config;
    let mut row = Vec::with_capacity(header.len());
    for t in 0..d.n_draws() {
        row.clear();
        row.push((cfg.burn_in + (t + 1) * cfg.thin).to_string());
        row.extend([d.beta0[t], d.sigma2[t], d.tau2[t], d.a0_hat[t]].iter().map(f64::to_string));
        row.extend(order.iter().map(|&i| d.pi[i][t].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

/// Columns of a draws dump by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrawsTable {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DrawsTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.values[i].as_slice())
    }
}

pub fn read_draws(path: &Path) -> CliResult<DrawsTable> {
    let source = path.display().to_string();
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let columns: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    for need in ["beta0", "sigma2", "tau2"] {
        if !columns.iter().any(|c| c == need) {
            return Err(CliError::Input { path: source, line: 1, message: format!("missing column `{need}`") });
        }
    }
    let mut values = vec![Vec::new(); columns.len()];
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        for (k, field) in row.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| CliError::Input {
                path: source.clone(),
                line,
                message: format!("`{field}` in column `{}` is not a number", columns[k]),
            })?;
            values[k].push(v);
        }
    }
    Ok(DrawsTable { columns, values })
}
