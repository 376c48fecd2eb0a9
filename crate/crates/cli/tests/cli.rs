use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_ttpeel");

fn ttpeel(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synthetic_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ttpeel(&["synthetic", "--shape", "6,7,8", "--true-ranks", "2,3", "--seed", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("synthetic.json"));
    assert!(report["relative_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["actions"], report["predicted_actions"]);
    assert_eq!(report["error_method"], "entries");
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "synthetic");
    assert_eq!(manifest["seed"], 4);
    assert!(manifest["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 1);
}

#[test]
fn json_keys_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    ttpeel(&["synthetic", "--shape", "5,5,5", "--true-ranks", "2,2"], dir.path());
    let text = fs::read_to_string(dir.path().join("synthetic.json")).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn truncated_build_reports_svd_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = ttpeel(
        &["synthetic", "--shape", "6,6,6,6", "--true-ranks", "4,5,4", "--build-ranks", "2,2,2"],
        dir.path(),
    );
    assert!(out.status.success());
    let report = json(&dir.path().join("synthetic.json"));
    let err = report["relative_error"].as_f64().unwrap();
    let floor = report["tt_svd_error"].as_f64().unwrap();
    assert!(err >= floor * (1.0 - 1e-10), "{err} below {floor}");
    assert_eq!(report["pass"], false);
}

#[test]
fn hilbert_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ttpeel(&["hilbert", "--dims", "6,7,8,9", "--r-min", "2", "--r-max", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("hilbert.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,method,rel_error,actions"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("2,rsvd,"));
    assert!(rows[1].starts_with("2,svd,"));
}

#[test]
fn taylor_order_zero_mean_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = ttpeel(&["taylor", "--n", "6", "--max-order", "2", "--rank", "4", "--samples", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(dir.path().join("taylor_stats.csv")).unwrap();
    let rows: Vec<(usize, f64, f64, usize)> = r.deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!((rows[0].1 - 1.0).abs() < 1e-12);
    let samples = fs::read_to_string(dir.path().join("taylor_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 20 * 3);
}

#[test]
fn derivative_first_order_uses_matrix_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = ttpeel(&["derivative", "--n", "6", "--order", "1", "--rank", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("derivative.json"));
    assert_eq!(report["ranks"].as_array().unwrap().len(), 1);
    assert!(report["relative_sigma1_error"].as_f64().unwrap() < 1.0);
}

#[test]
fn config_file_sets_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    fs::write(&cfg, r#"{"n": 5, "order": 2, "rank": 3}"#).unwrap();
    let out = ttpeel(&["derivative", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("out/derivative.json"));
    assert_eq!(report["n"], 5);
    assert_eq!(report["ranks"], serde_json::json!([3, 3]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_shape = ttpeel(&["synthetic", "--shape", "5", "--true-ranks", ""], dir.path());
    assert_eq!(bad_shape.status.code(), Some(2));
    let bad_method = ttpeel(&["hilbert", "--dims", "4,4,4", "--methods", "cross"], dir.path());
    assert_eq!(bad_method.status.code(), Some(2));
    let missing = ttpeel(&["taylor", "--config", "/nonexistent/model.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let info = ttpeel(&["info"], dir.path());
    assert!(info.status.success());
    assert!(String::from_utf8_lossy(&info.stdout).contains("ttpeel"));
}
