//! End-to-end tests of the `psifrac` binary: subcommand output, exit codes,
//! report determinism and the config round-trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psifrac"))
}

fn write_classical_config(dir: &Path) -> PathBuf {
    let path = dir.join("classical.json");
    std::fs::write(
        &path,
        r#"{
  "psi": {"kind": "builtin", "name": "identity"},
  "order": {"alpha1": 1.0, "alpha2": 1.0, "beta": 1.0},
  "domain": {"a": 1.0, "b": 1.0},
  "f": "u",
  "phi": "x",
  "xi": "0.5*y",
  "lf": 1.0,
  "grid": {"nx": 33, "ny": 33},
  "tol": 1e-9,
  "seed": 7
}"#,
    )
    .unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ml_prints_e_to_full_precision() {
    let out = bin().args(["ml", "--alpha", "1", "--z", "1"]).output().unwrap();
    assert!(out.status.success());
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - std::f64::consts::E).abs() < 1e-14, "{value}");
}

#[test]
fn ml_rejects_bad_domain() {
    let out = bin()
        .args(["ml", "--alpha", "0", "--z", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: kind="));
}

#[test]
#[allow(clippy::approx_constant)] // frozen reference values, not named constants
fn oracle_prints_closed_forms() {
    let out = bin()
        .args([
            "oracle", "unit2d", "--alpha1", "0.5", "--alpha2", "0.5", "--x", "1", "--y", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - 1.2732395447351627).abs() < 1e-10, "{value}");

    let out = bin()
        .args([
            "oracle", "power1d", "--alpha", "0.5", "--delta", "1", "--x", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - 1.1283791670955126).abs() < 1e-10, "{value}");
}

#[test]
fn solve_missing_config_exits_2_and_names_file() {
    let out = bin()
        .args(["solve", "--config", "/definitely/missing.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.json"));
}

#[test]
fn solve_invalid_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = bin()
        .args(["solve", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_solution_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_classical_config(dir.path());
    let sol = dir.path().join("sol.csv");
    let log = dir.path().join("log.json");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&sol)
        .args(["--log"])
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&sol).unwrap();
    assert!(csv.starts_with("x,y,value\n"));
    assert_eq!(csv.lines().count(), 1 + 33 * 33);
    let log: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&log).unwrap())
        .unwrap();
    assert_eq!(log["converged"], serde_json::Value::Bool(true));
    assert!(log["steps"].as_array().unwrap().len() >= 2);
    assert!(log["steps"][0]["distance"].as_f64().is_some());
}

#[test]
fn solve_non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_classical_config(dir.path());
    let out = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--max-iter", "1", "--out"])
        .arg(dir.path().join("sol.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("kind=non-convergence"));
}

#[test]
fn integrate_unit_field_reaches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_classical_config(dir.path());
    let out_path = dir.path().join("int.csv");
    let out = bin()
        .args(["integrate", "--config"])
        .arg(&config)
        .args(["--expr", "1", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    // last row is the far corner (1,1); classical orders integrate 1 to xy = 1
    let last = csv.lines().last().unwrap();
    let value: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((value - 1.0).abs() < 1e-9, "{last}");
}

#[test]
fn differentiate_classical_special_case() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_classical_config(dir.path());
    let out = bin()
        .args(["differentiate", "--config"])
        .arg(&config)
        .args(["--expr", "x*y", "--special", "classical", "--grid", "48x48", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // interior value of the mixed derivative of xy is 1
    let mid = doc["values"][24][24].as_f64().unwrap();
    assert!((mid - 1.0).abs() < 1e-3, "{mid}");
}

#[test]
fn gronwall_bound_table() {
    let out = bin()
        .args([
            "gronwall", "--alpha", "1", "--v", "1", "--h", "1", "--t1", "2", "--nodes", "33",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    let bound: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((bound - 2f64.exp()).abs() < 1e-9, "{last}");
}

#[test]
fn gronwall_verify_reports_conclusion() {
    let out = bin()
        .args([
            "gronwall", "--alpha", "0.7", "--v", "1", "--h", "0.5", "--t1", "1", "--nodes",
            "65", "--u-expr", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stderr(&out).contains("conclusion_all_hold=true"));
}

fn normalize_report(text: &str) -> String {
    let mut doc: serde_json::Value = serde_json::from_str(text).unwrap();
    doc["timestamp"] = serde_json::Value::from(0u64);
    serde_json::to_string_pretty(&doc).unwrap()
}

#[test]
fn stability_uh_report_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_classical_config(dir.path());
    let run = |threads: &str, out_name: &str| -> PathBuf {
        let out_path = dir.path().join(out_name);
        let out = bin()
            .env("PSIFRAC_THREADS", threads)
            .args(["stability", "uh", "--config"])
            .arg(&config)
            .args(["--epsilon", "0.01", "--draws", "3", "--seed", "7", "--out"])
            .arg(&out_path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        out_path
    };
    let first = run("1", "report1.json");
    let second = run("4", "report2.json");
    let a = std::fs::read_to_string(&first).unwrap();
    let b = std::fs::read_to_string(&second).unwrap();
    assert_eq!(normalize_report(&a), normalize_report(&b));
    let doc: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(doc["all_pass"], serde_json::Value::Bool(true));
    assert_eq!(doc["runs"].as_array().unwrap().len(), 3);
    assert_eq!(doc["runs"][0]["gamma_rule"], "standard");
    assert_eq!(doc["runs"][0]["ml_order"], "axis");
    assert_eq!(doc["runs"][0]["seed"], 7);
}

#[test]
fn stability_report_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_classical_config(dir.path());
    let report1_path = dir.path().join("report1.json");
    let out = bin()
        .args(["stability", "uh", "--config"])
        .arg(&config)
        .args(["--epsilon", "0.02", "--draws", "2", "--seed", "11", "--out"])
        .arg(&report1_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // re-run from the embedded config with no flags beyond the config itself
    let report1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report1_path).unwrap()).unwrap();
    let embedded = dir.path().join("embedded.json");
    std::fs::write(&embedded, serde_json::to_string_pretty(&report1["config"]).unwrap())
        .unwrap();
    let report2_path = dir.path().join("report2.json");
    let out = bin()
        .args(["stability", "uh", "--config"])
        .arg(&embedded)
        .args(["--out"])
        .arg(&report2_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let a = std::fs::read_to_string(&report1_path).unwrap();
    let b = std::fs::read_to_string(&report2_path).unwrap();
    assert_eq!(normalize_report(&a), normalize_report(&b));
}

#[test]
fn stability_uhr_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uhr.json");
    std::fs::write(
        &path,
        r#"{
  "psi": {"kind": "builtin", "name": "bounded"},
  "order": {"alpha1": 0.75, "alpha2": 0.75, "beta": 0.5},
  "domain": {"a": 1.0, "b": 1.0},
  "f": "0.5*u",
  "phi": "0",
  "xi": "0",
  "lf": 0.5,
  "grid": {"nx": 33, "ny": 33},
  "tol": 1e-9,
  "seed": 3
}"#,
    )
    .unwrap();
    let report_path = dir.path().join("report.json");
    let out = bin()
        .args(["stability", "uhr", "--config"])
        .arg(&path)
        .args(["--weight-expr", "1 + x + y", "--draws", "2", "--out"])
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(doc["all_pass"], serde_json::Value::Bool(true));
    assert_eq!(doc["mode"], "uhr");
    assert!(doc["runs"][0]["lambdas"].as_array().is_some());
    assert!(doc["runs"][0]["constants_other_indices"].as_array().is_some());
}

#[test]
fn stability_uhr_rejects_degenerate_weight() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uhr.json");
    std::fs::write(
        &path,
        r#"{
  "psi": {"kind": "builtin", "name": "bounded"},
  "order": {"alpha1": 0.75, "alpha2": 0.75, "beta": 0.5},
  "domain": {"a": 1.0, "b": 1.0},
  "f": "0.5*u",
  "phi": "0",
  "xi": "0",
  "lf": 0.5,
  "grid": {"nx": 33, "ny": 33}
}"#,
    )
    .unwrap();
    let out = bin()
        .args(["stability", "uhr", "--config"])
        .arg(&path)
        .args(["--weight-expr", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("kind=lambda"));
}
