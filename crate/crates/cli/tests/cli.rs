use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_incentive-sim"))
}

const CONFIG: &str = r#"
iterations = 100
seeds = [1]

[[scenarios]]
kind = "quad_convex"

[[algorithms]]
kind = "daio"
"#;

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&config).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest = out.join("manifest.json");
    assert!(manifest.exists());
    let plot = bin().args(["plot", "--manifest"]).arg(&manifest).output().unwrap();
    assert_eq!(plot.status.code(), Some(0));
    assert!(out.join("quad_convex_s1_voltage.svg").exists());
    assert!(out.join("quad_convex_s1_cost.svg").exists());
}

#[test]
fn validate_reports_the_dual_step_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, CONFIG).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("admissible bound"));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, CONFIG.replace("iterations = 100", "iterations = 0")).unwrap();
    let out = bin().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    fs::write(&config, "not = [valid").unwrap();
    assert_eq!(bin().args(["validate", "--config"]).arg(&config).status().unwrap().code(), Some(1));
}

#[test]
fn missing_manifest_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["plot", "--manifest"]).arg(dir.path().join("none.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
