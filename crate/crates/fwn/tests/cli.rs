use std::path::PathBuf;
use std::process::{Command, Output};

fn fwn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwn")).args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fwn-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> String {
    let p = tmp(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn algebra_suite_passes() {
    let out = fwn(&["verify", "--config", "preset:massive1d", "--suite", "algebra"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["pass"], true);
    assert_eq!(v["config"]["scenario"]["mode_cutoff"], 8);
}

#[test]
fn impossible_tolerance_fails_the_suite() {
    let out = fwn(&["verify", "--config", "preset:massive1d", "--suite", "algebra", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_2() {
    let unknown = write("unknown.json", r#"{"scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4},"extra":0}"#);
    let nested = write("nested.json", r#"{"scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4,"cutof":3}}"#);
    let bad_dim = write("dim.json", r#"{"scenario":{"torus_dim":2,"mass":2,"mode_cutoff":4}}"#);
    for cfg in [unknown.as_str(), nested.as_str(), bad_dim.as_str(), "/nonexistent/x.json", "preset:nope"] {
        let out = fwn(&["spectrum", "--config", cfg, "--count", "2"]);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(fwn(&["verify", "--config", "preset:massive1d", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(fwn(&[]).status.code(), Some(2));
}

#[test]
fn implementer_suite_refuses_large_models() {
    let out = fwn(&["verify", "--config", "preset:massive3d", "--suite", "implementer"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_gauge_implementer_suite_is_exact() {
    let cfg = write(
        "zero.json",
        r#"{"scenario":{"torus_dim":1,"mass":2,"shift_c":2,"mode_cutoff":4},"gauge":{"coefficients":[]},"verify":{"seed":3}}"#,
    );
    let out = fwn(&["verify", "--config", &cfg, "--suite", "implementer"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["seed"], 3);
    for c in v["report"]["checks"].as_array().unwrap() {
        assert_eq!(c["residual"], 0.0);
    }
}

#[test]
fn spectrum_lists_lowest_values() {
    let out = fwn(&["spectrum", "--config", "preset:massive1d", "--count", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("2.000000000000000") && rows[1].contains("2.000000000000000"));
}

#[test]
fn matelem_prints_both_routes() {
    let out = fwn(&["matelem", "--config", "preset:massive1d", "--alpha-out", "1", "--alpha-in", "0", "--s", "+", "--t", "-"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("formula") && text.contains("quadrature") && text.contains("diff"));
    let far = fwn(&["matelem", "--config", "preset:massive1d", "--alpha-out", "9", "--alpha-in", "0", "--s", "+", "--t", "-"]);
    assert_eq!(far.status.code(), Some(2));
    let wrong_dim = fwn(&["matelem", "--config", "preset:massive3d", "--alpha-out", "1", "--alpha-in", "0", "--s", "+", "--t", "-"]);
    assert_eq!(wrong_dim.status.code(), Some(2));
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let (a, b, csv) = (tmp("a.json"), tmp("b.json"), tmp("a.csv"));
    for out in [&a, &b] {
        let o = fwn(&["analyze", "--config", "preset:massless3d", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(v["report"]["verdicts"]["implementable_as_gamma_to_dual"], false);
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv.lines().next(), Some("criterion,p,Λ,partial_sum"));
}

#[test]
fn unwritable_output_exits_2() {
    let o = fwn(&["analyze", "--config", "preset:massive1d", "--out", "/nonexistent/dir/out.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preset_round_trips_through_a_file() {
    let out = fwn(&["preset", "massless1d"]);
    assert_eq!(out.status.code(), Some(0));
    let path = write("preset.json", &String::from_utf8(out.stdout).unwrap());
    let a = fwn(&["spectrum", "--config", &path, "--count", "4"]);
    let b = fwn(&["spectrum", "--config", "preset:massless1d", "--count", "4"]);
    assert_eq!(a.stdout, b.stdout);
}
