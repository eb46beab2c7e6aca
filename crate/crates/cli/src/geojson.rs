//! Property injection into a GeoJSON FeatureCollection.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::io::SummaryRow;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeReport {
    pub matched: usize,
    pub unmatched_features: Vec<String>,
    pub unmatched_rows: Vec<String>,
}

fn key_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Adds `median`, `relative_precision`, `reliability_level` and `reliable` to every
/// feature whose `key` property matches a row's `region_id`, and records the run under a
/// top-level `relirate` member. `rows` must hold at most one row per region.
pub fn merge(mut collection: Value, rows: &[SummaryRow], key: &str, metadata: Map<String, Value>) -> CliResult<(Value, MergeReport)> {
    let mut by_region: BTreeMap<&str, &SummaryRow> = BTreeMap::new();
    for r in rows {
        if by_region.insert(r.region_id.as_str(), r).is_some() {
            return Err(CliError::Validation(format!(
                "summary has several rows for region `{}`; select one stratum, year and model",
                r.region_id
            )));
        }
    }
    if collection.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(CliError::Validation("GeoJSON input is not a FeatureCollection".into()));
    }
    let features = collection
        .get_mut("features")
        .and_then(Value::as_array_mut)
        .ok_or_else(|| CliError::Validation("FeatureCollection has no `features` array".into()))?;

    let mut report = MergeReport::default();
    let mut used = BTreeMap::new();
    for (k, f) in features.iter_mut().enumerate() {
        let id = f.get("properties").and_then(|p| p.get(key)).and_then(key_string);
        let Some(id) = id else {
            report.unmatched_features.push(format!("#{k}"));
            continue;
        };
        match by_region.get(id.as_str()) {
            Some(row) => {
                let props = f
                    .as_object_mut()
                    .ok_or_else(|| CliError::Validation(format!("feature #{k} is not an object")))?
                    .entry("properties")
                    .or_insert_with(|| Value::Object(Map::new()));
                let props = props
                    .as_object_mut()
                    .ok_or_else(|| CliError::Validation(format!("feature #{k} properties are not an object")))?;
                props.insert("median".into(), json!(row.median));
                props.insert("relative_precision".into(), finite_or_null(row.relative_precision));
                props.insert("reliability_level".into(), json!(row.reliability_level));
                props.insert("reliable".into(), json!(row.reliable));
                report.matched += 1;
                used.insert(id, ());
            }
            None => report.unmatched_features.push(id),
        }
    }
    report.unmatched_rows = by_region.keys().filter(|r| !used.contains_key(**r)).map(|r| r.to_string()).collect();

    let mut meta = metadata;
    meta.insert("matched".into(), json!(report.matched));
    meta.insert("unmatched_features".into(), json!(report.unmatched_features));
    meta.insert("unmatched_rows".into(), json!(report.unmatched_rows));
    collection
        .as_object_mut()
        .expect("checked FeatureCollection")
        .insert("relirate".into(), Value::Object(meta));
    Ok((collection, report))
}

// JSON has no infinity; a zero-width interval is reported as null.
fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
