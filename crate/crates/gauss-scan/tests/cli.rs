use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gauss_scan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gauss-scan"))
        .args(args)
        .env_remove("GAUSS_SCAN_WORKERS")
        .env_remove("GAUSS_SCAN_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn without_runtime(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("runtime_seconds");
    v
}

#[test]
fn no_arguments_prints_help_and_fails() {
    let out = gauss_scan(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_arguments_are_configuration_errors() {
    for args in [
        &["threshold", "--setting", "nope", "--n", "10"][..],
        &["threshold", "--setting", "iid", "--n", "-5"],
        &["gumbel", "--setting", "discrete-cube", "--n", "64", "--replications", "0"],
        &["scan", "--dims", "4,4", "--side-min", "9"],
    ] {
        let out = gauss_scan(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn underpowered_tail_is_a_runtime_error() {
    let out = gauss_scan(&["tail", "--replications", "100", "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("underpowered"));
}

#[test]
fn iid_threshold_matches_the_classical_normalizer() {
    let v = json_of(&gauss_scan(&["threshold", "--setting", "iid", "--n", "1000", "--quiet"]));
    let c = (2.0 * 1000f64.ln()).sqrt();
    let expected = c - (1000f64.ln().ln() + (4.0 * std::f64::consts::PI).ln()) / (2.0 * c);
    let u = v["summary"]["u"].as_f64().unwrap();
    assert!((u - expected).abs() < 1e-12, "{u} vs {expected}");
    assert_eq!(v["command"], "threshold");
    assert!(v["constants_used"].as_array().unwrap().is_empty());
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let args = ["rates", "--n", "1e6", "--quiet"];
    let v = json_of(&gauss_scan(&args));
    let mut with_csv = args.to_vec();
    with_csv.extend(["--format", "csv"]);
    let out = gauss_scan(&with_csv);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = v["summary"]["table"].as_array().unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), rows.len());
    for (record, row) in records.iter().zip(rows) {
        for (key, cell) in header.iter().zip(record.iter()) {
            match &row[key] {
                Value::Number(n) => assert_eq!(cell.parse::<f64>().unwrap().to_bits(), n.as_f64().unwrap().to_bits()),
                Value::String(s) => assert_eq!(cell, s),
                other => panic!("unexpected {key}: {other}"),
            }
        }
    }
}

#[test]
fn reports_replay_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = gauss_scan(&[
        "gumbel",
        "--setting",
        "discrete-rect",
        "--d",
        "2",
        "--n",
        "10",
        "--replications",
        "12",
        "--seed",
        "77",
        "--emit-samples",
        "--quiet",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let original: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    assert_eq!(original["seed"], 77);
    assert_eq!(original["samples"]["tau_hat"].as_array().unwrap().len(), 12);

    let replay = json_of(&gauss_scan(&["--config", first.to_str().unwrap(), "--workers", "3", "--quiet"]));
    assert_eq!(without_runtime(replay), without_runtime(original));

    let clash = gauss_scan(&["--config", first.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"command":"lln","replications":3}"#).unwrap();
    let out = gauss_scan(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

fn cached_run(dir: &Path) -> Output {
    gauss_scan(&[
        "threshold",
        "--setting",
        "continuous-cube",
        "--d",
        "2",
        "--n",
        "100",
        "--mc-replications",
        "200",
        "--cache-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn constants_are_cached_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let first = cached_run(dir.path());
    assert!(String::from_utf8_lossy(&first.stderr).contains("computed, cached"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let second = cached_run(dir.path());
    assert!(String::from_utf8_lossy(&second.stderr).contains("cache hit"));
    assert_eq!(without_runtime(json_of(&first)), without_runtime(json_of(&second)));

    let other = gauss_scan(&[
        "threshold",
        "--setting",
        "continuous-cube",
        "--d",
        "2",
        "--n",
        "100",
        "--mc-replications",
        "201",
        "--cache-dir",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(other.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn scan_reports_the_argmax_window() {
    let v = json_of(&gauss_scan(&["scan", "--dims", "6,5", "--shape", "rect", "--check-naive", "--quiet"]));
    let s = &v["summary"];
    assert!(s["max_value"].as_f64().unwrap().is_finite());
    assert_eq!(s["windows_scanned"], 21 * 15);
    assert_eq!(s["naive"]["agrees"], true);
    assert_eq!(s["naive"]["max_value"], s["max_value"]);
}
