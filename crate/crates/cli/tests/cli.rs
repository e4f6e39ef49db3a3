use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn mfsde(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfsde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MFSDE_OUT")
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn usage_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cir = scenario("cir.json");
    let cir = cir.to_str().unwrap();
    for args in [
        vec!["simulate", "--scenario", cir, "--paths", "0"],
        vec!["simulate", "--scenario", cir, "--jobs", "0"],
        vec!["simulate", "--scenario", cir, "--dt", "-1"],
        vec!["simulate", "--scenario", cir, "--bogus"],
    ] {
        let o = mfsde(&args, dir.path());
        assert_eq!(o.status.code(), Some(3), "{args:?}: {}", text(&o));
    }
}

#[test]
fn failing_assumption_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfsde(&["validate", "--scenario", scenario("broken_square.json").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let t = text(&o);
    assert!(t.contains("sigma_modulus | FAIL") && t.contains("witness"), "{t}");
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("validation.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("witness"));
}

#[test]
fn schema_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let body = std::fs::read_to_string(scenario("cir.json")).unwrap().replacen("\"horizon\"", "\"horizn\"", 1);
    std::fs::write(&bad, body).unwrap();
    let o = mfsde(&["simulate", "--scenario", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let t = text(&o);
    assert!(t.contains("bad.json:") && t.contains("horizn"), "{t}");
}

#[test]
fn time_only_drift_selects_deterministic_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfsde(&["approx", "--scenario", scenario("time_drift.json").to_str().unwrap(), "--paths", "4"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("approx_report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "deterministic");
    assert_eq!(report["mode_auto_selected"], true);
    assert_eq!(report["ordering_max_violation"], 0.0);
    assert!(dir.path().join("bound_envelope.csv").exists());
}

#[test]
fn single_step_ladder_reports_zero_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfsde(
        &["uniqueness", "--scenario", scenario("cir.json").to_str().unwrap(), "--ladder", "0.015625", "--paths", "10"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", text(&o));
    let mut rows = csv::Reader::from_path(dir.path().join("divergence.csv")).unwrap();
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0][1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_mfsde"))
        .args(["simulate", "--scenario", scenario("cir.json").to_str().unwrap(), "--paths", "2"])
        .env("MFSDE_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    for name in ["paths.csv", "summary.json", "aggregate.csv"] {
        assert!(target.join(name).exists(), "{name}");
    }
}
