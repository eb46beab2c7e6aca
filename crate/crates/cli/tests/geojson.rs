use std::path::PathBuf;

use serde_json::{json, Map, Value};

use relirate_cli::geojson::merge;
use relirate_cli::SummaryRow;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn collection() -> Value {
    json!({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": {"GEOID": "A", "NAME": "a"}, "geometry": null},
            {"type": "Feature", "properties": {"GEOID": "B", "NAME": "b"}, "geometry": null}
        ]
    })
}

fn row(id: &str) -> SummaryRow {
    SummaryRow {
        region_id: id.into(),
        stratum: "s".into(),
        year: 2019,
        model: "standard".into(),
        events: 20,
        trials: 200,
        crude_rate: Some(0.1),
        median: 0.1,
        ci_low: 0.06,
        ci_high: 0.15,
        level: 0.95,
        relative_precision: 1.1,
        reliability_level: 0.96,
        reliable: true,
        low_sample: false,
    }
}

#[test]
fn empty_summary_only_adds_metadata() {
    let (out, report) = merge(collection(), &[], "GEOID", Map::new()).unwrap();
    assert_eq!(report.matched, 0);
    assert_eq!(report.unmatched_features.len(), 2);
    let mut stripped = out.clone();
    stripped.as_object_mut().unwrap().remove("relirate");
    assert_eq!(stripped, collection());
}

#[test]
fn one_matched_feature() {
    let (out, report) = merge(collection(), &[row("B"), row("Z")], "GEOID", Map::new()).unwrap();
    assert_eq!(report.matched, 1);
    assert_eq!(report.unmatched_rows, vec!["Z".to_string()]);
    let f = &out["features"];
    assert_eq!(f[0], collection()["features"][0]);
    assert_eq!(f[1]["properties"]["median"], json!(0.1));
    assert_eq!(f[1]["properties"]["reliable"], json!(true));
    assert_eq!(f[1]["properties"]["NAME"], json!("b"));
}

#[test]
fn rejects_bad_input() {
    assert!(merge(json!({"type": "Feature"}), &[], "GEOID", Map::new()).is_err());
    assert!(merge(collection(), &[row("A"), row("A")], "GEOID", Map::new()).is_err());
}

#[test]
fn infinite_precision_is_null() {
    let mut r = row("A");
    r.relative_precision = f64::INFINITY;
    let (out, _) = merge(collection(), &[r], "GEOID", Map::new()).unwrap();
    assert_eq!(out["features"][0]["properties"]["relative_precision"], Value::Null);
}

#[test]
fn bundled_counties_all_match() {
    let text = std::fs::read_to_string(data_dir().join("pa_counties.geojson")).unwrap();
    let gj: Value = serde_json::from_str(&text).unwrap();
    let rows: Vec<SummaryRow> = relirate_sim::pa::counties().iter().map(|c| row(&c.region_id)).collect();
    let (_, report) = merge(gj, &rows, "GEOID", Map::new()).unwrap();
    assert_eq!(report.matched, 67);
    assert!(report.unmatched_features.is_empty() && report.unmatched_rows.is_empty());
}
