//! The command-line binary end to end.

use std::process::Command;

use serde_json::Value;

fn cogpower() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cogpower"))
}

fn error_record(out: &std::process::Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

#[test]
fn run_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(
        &scenario,
        cogpower::config::DEFAULT_SCENARIO_TOML
            .replace("users = 10", "users = 3")
            .replace("subcarriers = 10", "subcarriers = 3"),
    )
    .unwrap();
    let out = cogpower()
        .args(["run", "--config"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["final_powers"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn oracle_certifies_a_supplied_profile() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(
        &scenario,
        cogpower::config::DEFAULT_SCENARIO_TOML
            .replace("users = 10", "users = 2")
            .replace("subcarriers = 10", "subcarriers = 2"),
    )
    .unwrap();
    let profile = dir.path().join("p.csv");
    std::fs::write(&profile, "0.01,0.02\n0.03,0.0\n").unwrap();
    let out = cogpower()
        .args(["oracle", "--config"])
        .arg(&scenario)
        .arg("--profile")
        .arg(&profile)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["best_response_gap"].as_array().unwrap().len(), 2);
}

#[test]
fn infeasible_profile_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("p.csv");
    std::fs::write(&profile, "5,5\n5,5\n").unwrap();
    let out = cogpower()
        .arg("oracle")
        .arg("--profile")
        .arg(&profile)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let rec = error_record(&out);
    assert!(rec["error"]["kind"].is_string());
    assert!(rec["error"]["message"].is_string());
}

#[test]
fn unknown_figure_and_bad_flags_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogpower().args(["reproduce", "fig12", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"]["kind"], "invalid");

    let out = cogpower().args(["run", "--mode", "sideways"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "usage");

    let out = cogpower().args(["run", "--config", "/nonexistent/s.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    assert!(cogpower().arg("--help").output().unwrap().status.success());
}

#[test]
fn sweep_and_baseline_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    let scenario = cogpower::config::DEFAULT_SCENARIO_TOML
        .replace("users = 10", "users = 2")
        .replace("subcarriers = 10", "subcarriers = 2");
    std::fs::write(
        &spec,
        format!("[sweep]\nparameter = \"lambda0\"\nvalues = [0.0, 1.0]\nreplications = 2\n\n{scenario}"),
    )
    .unwrap();
    let out = cogpower().arg("sweep").arg(&spec).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let scenario_path = dir.path().join("s.toml");
    std::fs::write(&scenario_path, &scenario).unwrap();
    let out = cogpower()
        .arg("baseline")
        .arg("--config")
        .arg(&scenario_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["uniform"]["pu_rate"].is_number());
}
