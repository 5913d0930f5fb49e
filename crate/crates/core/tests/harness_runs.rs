use std::fs;

use incentive_core::harness::{emit_plots, execute, read_trace, run_experiment, ExperimentConfig, TRACE_HEADER};

const SMALL: &str = r#"
iterations = 200
seeds = [3]

[[scenarios]]
kind = "quad_convex"

[[algorithms]]
kind = "iii"

[[algorithms]]
kind = "foio"
gradient = { kind = "exact" }

[[algorithms]]
kind = "zoio"
"#;

#[test]
fn identical_configs_write_identical_files() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, pa) = run_experiment(&cfg, a.path()).unwrap();
    let (_, pb) = run_experiment(&cfg, b.path()).unwrap();
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    for run in &ma.runs {
        let rel = run.trace.as_ref().unwrap();
        let ta = fs::read_to_string(a.path().join(rel)).unwrap();
        assert_eq!(ta, fs::read_to_string(b.path().join(rel)).unwrap());
        assert_eq!(ta.lines().next().unwrap(), TRACE_HEADER);
        assert_eq!(read_trace(&a.path().join(rel)).unwrap().len(), 200);
    }
}

#[test]
fn one_scenario_gives_two_plots() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = run_experiment(&cfg, dir.path()).unwrap();
    let plots = emit_plots(&manifest).unwrap();
    assert_eq!(plots.len(), 2);
    for p in &plots {
        let svg = fs::read_to_string(p).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("data-value"));
    }
}

#[test]
fn zero_iterations_are_rejected() {
    let text = SMALL.replace("iterations = 200", "iterations = 0");
    assert!(ExperimentConfig::from_toml(&text).and_then(|c| c.validate()).is_err());
}

#[test]
fn time_varying_runs_record_every_fast_iteration() {
    let text = r#"
iterations = 1
seeds = [2]
dynamics = { slow_steps = 5, iters_per_slow_step = 20, event_rate = 0.4 }

[[scenarios]]
kind = "tv_step"
devices = 4

[[algorithms]]
kind = "foio"
gradient = { kind = "linear-approx" }
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let result = execute(&cfg).unwrap();
    assert_eq!(result.manifest.failed_runs(), 0);
    let trace = &result.traces[0];
    assert_eq!(trace.len(), 100);
    assert_eq!(trace.last().unwrap().slow_step, 4);
    assert_eq!(result.manifest.runs[0].recovery.len(), 4);
    let env = &result.manifest.environments[0];
    assert_eq!(env.baseline.as_ref().unwrap().values.len(), 5);
}

#[test]
fn duals_never_go_negative() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let result = execute(&cfg).unwrap();
    for run in &result.manifest.runs {
        assert!(run.min_dual.unwrap() >= 0.0, "{}", run.run_id);
    }
}
