use std::path::Path;
use std::process::{Command, Output};

use gpreg::experiment::{read_trajectory_csv, rms_error_last_quarter};
use serde_json::Value;

fn gpreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpreg")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn short_lorenz(dir: &Path, csv: &str) -> String {
    format!(
        "plant = \"lorenz\"\nduration = 4.0\n[output]\ntrajectory = {:?}\nmetrics = {:?}\n",
        dir.join(csv),
        dir.join(format!("{csv}.json"))
    )
}

#[test]
fn unknown_key_is_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "plant = \"lorenz\"\n[regulator]\ngain = 3\n");
    let err = error_json(&gpreg(&["run", &cfg]));
    assert_eq!(err["error"], "UnknownKey");
    assert_eq!(err["key"], "regulator.gain");
}

#[test]
fn negative_gain_is_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "plant = \"lorenz\"\nregulator.k_p = -1\n");
    let err = error_json(&gpreg(&["run", &cfg]));
    assert_eq!(err["error"], "InvalidValue");
    assert_eq!(err["key"], "regulator.k_p");
}

#[test]
fn unknown_example_and_missing_file() {
    assert_eq!(error_json(&gpreg(&["reproduce", "example9"]))["error"], "UnknownExample");
    assert_eq!(error_json(&gpreg(&["run", "/nonexistent/cfg.toml"]))["error"], "IoError");
}

#[test]
fn runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.toml", &short_lorenz(dir.path(), "a.csv"));
    let b = write_config(dir.path(), "b.toml", &short_lorenz(dir.path(), "b.csv"));
    assert!(gpreg(&["run", &a]).status.success());
    assert!(gpreg(&["run", &b]).status.success());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv.json"), read("b.csv.json"));
}

#[test]
fn reported_metrics_match_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &short_lorenz(dir.path(), "c.csv"));
    let out = gpreg(&["run", &cfg]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (header, rows) = read_trajectory_csv(&dir.path().join("c.csv")).unwrap();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let ts: Vec<f64> = rows.iter().map(|r| r[col("t")]).collect();
    let es: Vec<f64> = rows.iter().map(|r| r[col("e")]).collect();
    let reported = report["metrics"]["rms_error_last_quarter"].as_f64().unwrap();
    assert!((rms_error_last_quarter(&ts, &es) - reported).abs() <= 1e-12);
    let written: Value = serde_json::from_slice(&std::fs::read(dir.path().join("c.csv.json")).unwrap()).unwrap();
    assert_eq!(written["rms_error_last_quarter"], report["metrics"]["rms_error_last_quarter"]);
}

#[test]
fn compare_im_reports_both_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.toml", "plant = \"lorenz\"\nduration = 4.0\n");
    let out = gpreg(&["compare-im", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["with_im"]["rms_error_last_quarter"].is_f64());
    assert!(v["without_im"]["rms_error_last_quarter"].is_f64());
    assert!(v["with_im_better"].is_boolean());
}

#[test]
fn oracle_check_passes_and_fails_as_asked() {
    let out = gpreg(&["oracle-check"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["residual"].as_f64().unwrap() <= 1e-4);
    let err = error_json(&gpreg(&["oracle-check", "--tolerance", "1e-30"]));
    assert_eq!(err["error"], "OracleMismatch");
}
