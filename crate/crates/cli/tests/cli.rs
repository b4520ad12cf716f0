use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multinorm"))
        .args(args)
        .env("MULTINORM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn min_norm_of_identity_is_one() {
    let out = run(&["norm", "--quant", "min", "--instance", &data("identity_min.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["lower"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["upper"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["instance_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn max_norm_of_identity_is_nuclear() {
    let out = run(&["norm", "--quant", "max", "--instance", &data("identity_min.json")]);
    let v = json(&out);
    assert!(v["lower"].as_f64().unwrap() <= 2.0 + 1e-9 && v["upper"].as_f64().unwrap() >= 2.0 - 1e-9);
}

#[test]
fn gnorm_reports_representation() {
    let out = run(&["gnorm", "--instance", &data("hilbert_tensor.json"), "--budget", "8", "--restarts", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["upper"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!(v["representation"]["terms"].is_array());
}

#[test]
fn pnorm_oracle_agrees() {
    let out = run(&["pnorm", "--oracle", "thm64", "--instance", &data("conjugate_lq.json"), "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let oracle = v["oracle"]["lower"].as_f64().unwrap();
    assert!((v["upper"].as_f64().unwrap() - oracle).abs() <= 1e-6 * oracle);
}

#[test]
fn pnorm_oracle_precondition() {
    let out = run(&["pnorm", "--oracle", "thm64", "--instance", &data("hilbert_tensor.json"), "--budget", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["norm", "--quant", "min", "--instance", "/nonexistent/x.json"]).status.code(), Some(2));
    let bad = run(&["norm", "--quant", "min", "--instance", &data("malformed.json")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains(":1:"));
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["norm", "--quant", "nope", "--instance", &data("identity_min.json")]).status.code(), Some(2));
    // No space and no --q.
    assert_eq!(run(&["norm", "--quant", "min", "--instance", &data("hilbert_tensor.json")]).status.code(), Some(2));
}

#[test]
fn verify_suites_pass() {
    let out = run(&["verify", "--suite", "diamond-metric", "--trials", "100", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify", "--suite", "thm64", "--trials", "6", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["suite"]["max_gap"].as_f64().unwrap() <= 1e-6);
    let out = run(&["verify", "--suite", "pconvex-counterexample"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!json(&out)["suite"]["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn reports_are_reproducible() {
    let args = ["verify", "--suite", "triangle", "--trials", "12", "--seed", "9"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let args = ["gnorm", "--instance", &data("hilbert_tensor.json"), "--restarts", "3", "--seed", "4"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn table_and_csv_formats() {
    let out = run(&["norm", "--quant", "min", "--instance", &data("identity_min.json"), "--format", "table"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("upper") && l.trim_end().ends_with("1.000000000000")));
    let out = run(&["norm", "--quant", "min", "--instance", &data("identity_min.json"), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("multinorm-out-{}.json", std::process::id()));
    let p = path.display().to_string();
    let out = run(&["norm", "--quant", "min", "--instance", &data("identity_min.json"), "--out", &p]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "norm");
    std::fs::remove_file(path).ok();
}
