use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relirate_cli::io::{read_rows, A0Row, SummaryRow};
use relirate_cli::manifest::RunManifest;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn relirate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relirate")).args(args).env_remove("RELIRATE_THREADS").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SHORT: [&str; 6] = ["--iters", "6000", "--burnin", "3000", "--thin", "3"];

fn fit(out: &Path, model: &str, extra: &[&str]) -> Output {
    let counts = data("pa_synthetic_counts.csv");
    let edges = data("pa_adjacency.tsv");
    let mut args = vec!["fit", "--counts", s(&counts), "--edges", s(&edges), "--model", model, "--out", s(out)];
    args.extend_from_slice(&SHORT);
    args.extend_from_slice(extra);
    relirate(&args)
}

#[test]
fn required_cases_prints_an_integer() {
    let o = relirate(&["required-cases", "--pi0", "0.01", "--a", "0.5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "16");
    let o = relirate(&["required-cases", "--pi0", "0.6", "--a", "0.5", "--level", "0.999", "--n", "5"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "none");
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "region_id,stratum,year,events,trials\nA,s,2019,12,10\n").unwrap();
    let o = relirate(&["assess", "--counts", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(relirate(&["required-cases", "--pi0", "1.5", "--a", "0.5"]).status.code(), Some(2));
    assert_eq!(relirate(&["fit"]).status.code(), Some(2));
}

#[test]
fn stalled_constraint_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = fit(dir.path(), "restricted", &["--a0-max", "0.05", "--no-exact-truncation", "--stratum", "hispanic", "--year", "2019"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_regions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("c.csv");
    std::fs::write(&counts, "region_id,stratum,year,events,trials\n42001,s,2019,1,10\n").unwrap();
    let edges = data("pa_adjacency.tsv");
    let o = relirate(&["fit", "--counts", s(&counts), "--edges", s(&edges), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_info_compare_merge() {
    let dir = tempfile::tempdir().unwrap();
    let (std_dir, res_dir) = (dir.path().join("std"), dir.path().join("res"));
    let sel = ["--stratum", "asian", "--year", "2018", "--year", "2019"];
    assert!(fit(&std_dir, "standard", &sel).status.success());
    assert!(fit(&res_dir, "restricted", &sel).status.success());

    let rows: Vec<SummaryRow> = read_rows(&res_dir.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 134);
    assert!(rows.windows(2).all(|w| (w[0].year, &w[0].region_id) < (w[1].year, &w[1].region_id)));
    let a0: Vec<A0Row> = read_rows(&res_dir.join("a0_summary.csv")).unwrap();
    assert_eq!(a0.len(), 2);
    assert!(a0.iter().all(|r| r.a0_max < 5.0 && r.draws == 1000));

    let manifest: RunManifest = serde_json::from_slice(&std::fs::read(res_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.chains.len(), 2);
    assert_eq!(manifest.config.restriction_bound, Some(5.0));
    assert_ne!(manifest.chains[0].seed, manifest.chains[1].seed);
    let draws = res_dir.join(manifest.chains[1].draws_file.as_ref().unwrap());
    assert!(draws.ends_with("draws/asian_2019_restricted.csv"));

    let o = relirate(&["info", "--draws", s(&draws), "--m0", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let line: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(line[2], "1000");
    assert!((line[6].parse::<f64>().unwrap() - a0[1].a0_max).abs() < 1e-9);
    // a larger reference neighbor count raises the prior-case equivalent
    let o = relirate(&["info", "--draws", s(&draws), "--m0", "6"]);
    let six: f64 = String::from_utf8(o.stdout).unwrap().lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(six > a0[1].a0_median);

    let cmp = dir.path().join("cmp.csv");
    let std_summary = std_dir.join("summary.csv");
    let res_summary = res_dir.join("summary.csv");
    let o = relirate(&["compare", "--standard", s(&std_summary), "--restricted", s(&res_summary), "--out", s(&cmp)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&cmp).unwrap().lines().count(), 135);

    let merged = dir.path().join("m.geojson");
    let gj = data("pa_counties.geojson");
    let o = relirate(&["merge-geojson", "--summary", s(&res_summary), "--geojson", s(&gj), "--year", "2019", "--out", s(&merged)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&merged).unwrap()).unwrap();
    assert_eq!(v["relirate"]["matched"], 67);
    assert!(v["features"][0]["properties"]["reliability_level"].is_number());
    // two rows per region without a year filter
    let o = relirate(&["merge-geojson", "--summary", s(&res_summary), "--geojson", s(&gj), "--out", s(&merged)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_assess_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("o.csv");
    let scenario = data("scenarios/outlier.conf");
    assert!(relirate(&["simulate", "--scenario", s(&scenario), "--out", s(&counts)]).status.success());
    let text = std::fs::read_to_string(&counts).unwrap();
    assert_eq!(text.lines().count(), 68);

    let o = relirate(&["assess", "--counts", s(&counts), "--a", "5"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().count(), 68);
    assert!(out.lines().next().unwrap().ends_with("relative_precision,reliability_level,reliable"));

    let fixture = data("pa_synthetic_counts.csv");
    let o = relirate(&["aggregate", "--counts", s(&fixture), "--window", "1", "--window", "4"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 9);
}
