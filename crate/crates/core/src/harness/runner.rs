use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{AlgorithmSpec, ExperimentConfig, FamilySpec, Variant};
use super::scenario::{inflate_demand, nominal_q_ratio, synthetic_base_loads, synthetic_load_table, ScenarioInstance};
use super::HarnessError;
use crate::algorithms::{cost, daio_dual_value, daio_step_condition, Algorithm, Optimizer, Plant, VoltageChannel};
use crate::baseline::{convex_optimum, lp_optimum, BaselineError, Optimum};
use crate::dynamics::{
    build_birth_death_schedule, build_load_series_schedule, derive_quadratic_schedule, DynamicsError, LoadSeriesSetup, LoadTable,
    TimeVaryingScenario,
};
use crate::grid::NetworkCase;
use crate::linalg;
use crate::response::{generate_step_model, ResponseFamily};

/// One row of a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub run_id: String,
    pub algorithm: String,
    pub iteration: usize,
    pub slow_step: usize,
    pub min_voltage: f64,
    pub cost: f64,
    pub max_h: f64,
    pub feasible: bool,
    pub gap: Option<f64>,
}

pub const TRACE_HEADER: &str = "run_id,algorithm,iteration,slow_step,min_voltage,cost,max_h,feasible,gap";

/// Stable 64-bit seed for a named random stream under a base seed.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 8 bytes"))
}

/// A built scenario: the base plant and, for time-varying variants, its schedule.
#[derive(Debug, Clone)]
pub struct Environment {
    pub label: String,
    pub variant: Variant,
    pub seed: u64,
    pub base: Plant<f64>,
    pub schedule: Option<TimeVaryingScenario<f64>>,
    pub inflation_rounds: usize,
    pub inflated_violations: usize,
}

impl Environment {
    pub fn slow_steps(&self) -> usize {
        self.schedule.as_ref().map_or(1, |s| s.slow_steps)
    }

    pub fn plant_at(&self, k: usize) -> Result<Plant<f64>, HarnessError> {
        match &self.schedule {
            Some(s) => Ok(s.plant_at(k, &self.base)?),
            None => Ok(self.base.clone()),
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.base.response.params.t
    }
}

fn dynamics_err(e: DynamicsError) -> HarnessError {
    HarnessError::Scenario(e.to_string())
}

pub fn load_case(cfg: &ExperimentConfig) -> Result<NetworkCase<f64>, HarnessError> {
    match &cfg.case {
        Some(path) => NetworkCase::load(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display()))),
        None => Ok(NetworkCase::ieee33()),
    }
}

/// Base loads, linearization, inflation and thresholds from `seed`, then the
/// variant's responses from a stream derived from its label.
pub fn build_environment(cfg: &ExperimentConfig, case: &NetworkCase<f64>, variant: &Variant, seed: u64) -> Result<Environment, HarnessError> {
    let label = variant.label();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "instance"));
    let base = synthetic_base_loads(&mut rng, case, cfg.loads.band, cfg.safety.v_lower, cfg.loads.margin)?;
    let inst = ScenarioInstance::build(&mut rng, case.clone(), base, cfg.safety.v_lower, cfg.safety.v_upper, cfg.safety.mode, &cfg.inflation)?;
    let violations = super::count_lower_violations(&inst.sensitivity, &inst.spec, &inst.peak(), &inst.q_demand);
    let mut vrng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &label));
    let step_model = |rng: &mut ChaCha8Rng, devices: usize| {
        generate_step_model(rng, inst.params(), devices).map_err(|e| HarnessError::Scenario(e.to_string()))
    };
    let (model, schedule) = match variant {
        Variant::Stationary { family: FamilySpec::Step { devices } } => (step_model(&mut vrng, *devices)?, None),
        Variant::Stationary { family } => {
            let family = family.smooth_family().expect("non-step family");
            (crate::response::ResponseModel::new(inst.params(), family).map_err(|e| HarnessError::Scenario(e.to_string()))?, None)
        }
        Variant::TvStep { devices } | Variant::TvQuad { devices } => {
            let initial = step_model(&mut vrng, *devices)?;
            let mut s = build_birth_death_schedule(&mut vrng, &initial, &cfg.dynamics).map_err(dynamics_err)?;
            if matches!(variant, Variant::TvQuad { .. }) {
                s = derive_quadratic_schedule(&s).map_err(dynamics_err)?;
            }
            (s.schedule[0].clone(), Some(s))
        }
        Variant::TvLoadSeries { table, alpha } => {
            let table = match table {
                Some(path) => LoadTable::from_path(path).map_err(dynamics_err)?,
                None => synthetic_load_table(&mut vrng, &inst.u_star, cfg.dynamics.slow_steps, cfg.loads.volatility)?,
            };
            let setup = LoadSeriesSetup {
                case,
                thresholds: inst.t.clone(),
                q_ratio: nominal_q_ratio(case),
                alpha: *alpha,
                slow_steps: cfg.dynamics.slow_steps,
                iters_per_slow_step: cfg.dynamics.iters_per_slow_step,
            };
            let spec = inst.spec.clone();
            let s = build_load_series_schedule(&mut vrng, &table, &setup, |rng, sens, p, q| {
                inflate_demand(rng, sens, &spec, p, q, &cfg.inflation)
                    .map(|i| i.delta)
                    .map_err(|e| DynamicsError::Inflation(e.to_string()))
            })
            .map_err(dynamics_err)?;
            (s.schedule[0].clone(), Some(s))
        }
    };
    let mut plant = inst.plant(model)?;
    if let Some(s) = &schedule {
        plant = s.plant_at(0, &plant)?;
    }
    if cfg.channel == VoltageChannel::AcSweep {
        plant = plant.with_ac_channel(case.clone())?;
    }
    Ok(Environment {
        label,
        variant: variant.clone(),
        seed,
        base: plant,
        schedule,
        inflation_rounds: inst.inflation_rounds,
        inflated_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Exact optimum (LP or certified convex solve).
    Optimum,
    /// LP on the linear interpolation of `g`.
    Bound,
}

/// Reference values per slow step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub values: Vec<f64>,
    pub certified: Vec<bool>,
    /// `‖z★(k) − z★(k−1)‖` with `z = (i, λ)`, from step 1 on.
    pub temporal_variability: Vec<f64>,
}

impl Baseline {
    pub fn value_at(&self, k: usize) -> f64 {
        self.values[k.min(self.values.len() - 1)]
    }

    pub fn average(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn reference(plant: &Plant<f64>, tol: f64) -> Result<(Optimum<f64>, BaselineKind), BaselineError> {
    match plant.response.family {
        ResponseFamily::Linear => Ok((lp_optimum(plant)?, BaselineKind::Optimum)),
        ResponseFamily::QuadraticConvex | ResponseFamily::PolynomialConvex { .. } => Ok((convex_optimum(plant, tol)?, BaselineKind::Optimum)),
        _ => {
            let linear = plant.with_response(plant.response.linear_approximation())?;
            Ok((lp_optimum(&linear)?, BaselineKind::Bound))
        }
    }
}

pub fn compute_baseline(env: &Environment, tol: f64) -> Result<Baseline, HarnessError> {
    let mut out = Baseline { kind: BaselineKind::Optimum, values: Vec::new(), certified: Vec::new(), temporal_variability: Vec::new() };
    let mut prev: Option<Vec<f64>> = None;
    for k in 0..env.slow_steps() {
        let plant = env.plant_at(k)?;
        let (opt, kind) = reference(&plant, tol)?;
        out.kind = kind;
        out.values.push(opt.cost);
        out.certified.push(opt.certified);
        let z: Vec<f64> = opt.incentive.iter().chain(&opt.dual).copied().collect();
        if let Some(p) = &prev {
            let d: Vec<f64> = z.iter().zip(p).map(|(a, b)| a - b).collect();
            out.temporal_variability.push(linalg::norm2(&d));
        }
        prev = Some(z);
    }
    Ok(out)
}

/// The admissible DAIO step at `λ⁰` against the configured first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaioStepCheck {
    pub lambda0: f64,
    pub bound: f64,
    pub configured_step: f64,
    pub exceeds: bool,
}

pub fn daio_step_check(plant: &Plant<f64>, algorithm: &Algorithm<f64>) -> Result<Option<DaioStepCheck>, HarnessError> {
    let Algorithm::Daio { dual, lambda0 } = algorithm else { return Ok(None) };
    let n = plant.n();
    let lam0 = vec![*lambda0; n];
    let h0 = plant.h(&vec![0.0; n])?;
    daio_dual_value(plant, &lam0)?;
    let bound = daio_step_condition(&lam0, &h0, |l| daio_dual_value(plant, l).unwrap_or(f64::NAN));
    let configured_step = dual.initial();
    Ok(Some(DaioStepCheck { lambda0: *lambda0, bound, configured_step, exceeds: !(configured_step <= bound) }))
}

/// Per-run results written to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub scenario: String,
    pub seed: u64,
    pub algorithm: String,
    pub iterations: usize,
    pub trace: Option<String>,
    pub error: Option<String>,
    pub final_cost: Option<f64>,
    pub final_gap: Option<f64>,
    pub final_feasible: Option<bool>,
    pub final_max_h: Option<f64>,
    pub final_min_voltage: Option<f64>,
    pub first_feasible: Option<usize>,
    /// Mean cost over the last 10% of iterations.
    pub trailing_mean_cost: Option<f64>,
    pub mean_cost: Option<f64>,
    /// Feasible iterates cheaper than the slow step's baseline.
    pub below_bound: usize,
    pub min_dual: Option<f64>,
    /// Per slow-step transition: iterations until the first feasible iterate.
    pub recovery: Vec<Option<usize>>,
}

impl RunSummary {
    fn failed(run_id: String, env: &str, seed: u64, algorithm: String, error: String) -> Self {
        Self {
            run_id,
            scenario: env.to_string(),
            seed,
            algorithm,
            iterations: 0,
            trace: None,
            error: Some(error),
            final_cost: None,
            final_gap: None,
            final_feasible: None,
            final_max_h: None,
            final_min_voltage: None,
            first_feasible: None,
            trailing_mean_cost: None,
            mean_cost: None,
            below_bound: 0,
            min_dual: None,
            recovery: Vec::new(),
        }
    }
}

pub fn run_id(scenario: &str, seed: u64, algorithm: &str) -> String {
    let raw = format!("{scenario}-s{seed}-{algorithm}");
    raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

/// Runs one algorithm on an environment. Time-varying environments run
/// `iters_per_slow_step` iterations per slow step; stationary ones `iterations`.
pub fn run_algorithm(
    env: &Environment,
    baseline: Option<&Baseline>,
    algorithm: Algorithm<f64>,
    label: &str,
    iterations: usize,
) -> Result<(RunSummary, Vec<TraceRecord>), HarnessError> {
    let id = run_id(&env.label, env.seed, label);
    let (slow_steps, per_step) = match &env.schedule {
        Some(s) => (s.slow_steps, s.iters_per_slow_step),
        None => (1, iterations),
    };
    let mut opt = Optimizer::new(algorithm, env.base.n(), derive_seed(env.seed, &id))?;
    let mut records = Vec::with_capacity(slow_steps * per_step);
    let mut first_feasible = None;
    let mut below_bound = 0;
    let mut min_dual = f64::INFINITY;
    let mut recovery = Vec::new();
    for k in 0..slow_steps {
        let plant = env.plant_at(k)?;
        let reference = baseline.map(|b| b.value_at(k));
        let mut recovered = None;
        for j in 0..per_step {
            let m = opt.step(&plant)?;
            let c = cost(&opt.state.incentive);
            let feasible = m.feasible();
            let iteration = records.len() + 1;
            if feasible {
                first_feasible.get_or_insert(iteration);
                recovered.get_or_insert(j + 1);
                if reference.is_some_and(|b| c < b - 1e-6 * (1.0 + b.abs())) {
                    below_bound += 1;
                }
            }
            min_dual = opt.state.dual.iter().copied().fold(min_dual, f64::min);
            records.push(TraceRecord {
                run_id: id.clone(),
                algorithm: label.to_string(),
                iteration,
                slow_step: k,
                min_voltage: m.min_voltage(),
                cost: c,
                max_h: m.max_h(),
                feasible,
                gap: reference.map(|r| c - r),
            });
        }
        if k > 0 {
            recovery.push(recovered);
        }
    }
    let last = records.last().expect("at least one iteration").clone();
    let tail = (records.len() / 10).max(1);
    let trailing = records[records.len() - tail..].iter().map(|r| r.cost).sum::<f64>() / tail as f64;
    let mean = records.iter().map(|r| r.cost).sum::<f64>() / records.len() as f64;
    let summary = RunSummary {
        run_id: id,
        scenario: env.label.clone(),
        seed: env.seed,
        algorithm: label.to_string(),
        iterations: records.len(),
        trace: None,
        error: None,
        final_cost: Some(last.cost),
        final_gap: last.gap,
        final_feasible: Some(last.feasible),
        final_max_h: Some(last.max_h),
        final_min_voltage: Some(last.min_voltage),
        first_feasible,
        trailing_mean_cost: Some(trailing),
        mean_cost: Some(mean),
        below_bound,
        min_dual: Some(min_dual),
        recovery,
    };
    Ok((summary, records))
}

/// Scenario-level facts written to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub scenario: String,
    pub seed: u64,
    pub time_varying: bool,
    pub slow_steps: usize,
    pub inflation_rounds: Option<usize>,
    pub inflated_violations: Option<usize>,
    pub v_lower: f64,
    pub baseline: Option<Baseline>,
    pub daio_step_check: Option<DaioStepCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub environments: Vec<EnvironmentSummary>,
    pub runs: Vec<RunSummary>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))
    }

    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count() + self.environments.iter().filter(|e| e.error.is_some()).count()
    }
}

/// Results kept in memory: the manifest plus every trace, in manifest run order.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub manifest: Manifest,
    pub traces: Vec<Vec<TraceRecord>>,
}

fn run_iterations(cfg: &ExperimentConfig, spec: &AlgorithmSpec) -> usize {
    spec.iterations().unwrap_or(cfg.iterations)
}

/// Builds every (scenario, seed) environment and runs every algorithm on it,
/// in parallel. Module errors are recorded per run.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let case = load_case(cfg)?;
    let pairs: Vec<(Variant, u64)> = cfg.variants().into_iter().flat_map(|v| cfg.seeds.iter().map(move |&s| (v.clone(), s))).collect();
    let built: Vec<(Result<Environment, String>, Option<Baseline>, Option<String>)> = pairs
        .par_iter()
        .map(|(variant, seed)| match build_environment(cfg, &case, variant, *seed) {
            Ok(env) => match compute_baseline(&env, cfg.oracle_tolerance) {
                Ok(b) => (Ok(env), Some(b), None),
                Err(e) => {
                    log::warn!("{} seed {seed}: baseline failed: {e}", env.label);
                    (Ok(env), None, Some(e.to_string()))
                }
            },
            Err(e) => (Err(e.to_string()), None, None),
        })
        .collect();

    let jobs: Vec<(usize, &AlgorithmSpec)> = (0..built.len()).flat_map(|e| cfg.algorithms.iter().map(move |a| (e, a))).collect();
    let outcomes: Vec<(RunSummary, Vec<TraceRecord>)> = jobs
        .par_iter()
        .map(|&(e, spec)| {
            let (variant, seed) = &pairs[e];
            let label = spec.label();
            let id = run_id(&variant.label(), *seed, &label);
            let env = match &built[e].0 {
                Ok(env) => env,
                Err(msg) => return (RunSummary::failed(id, &variant.label(), *seed, label, format!("scenario: {msg}")), Vec::new()),
            };
            let algorithm = spec.build(env.thresholds(), env.variant.is_smooth(), &cfg.zo);
            match run_algorithm(env, built[e].1.as_ref(), algorithm, &label, run_iterations(cfg, spec)) {
                Ok(out) => out,
                Err(err) => (RunSummary::failed(id, &env.label, *seed, label, err.to_string()), Vec::new()),
            }
        })
        .collect();

    let mut environments = Vec::with_capacity(built.len());
    for ((variant, seed), (env, baseline, baseline_error)) in pairs.iter().zip(&built) {
        let summary = match env {
            Ok(env) => {
                let mut daio = None;
                for spec in &cfg.algorithms {
                    if let AlgorithmSpec::Daio { .. } = spec {
                        let algorithm = spec.build(env.thresholds(), true, &cfg.zo);
                        daio = daio_step_check(&env.base, &algorithm).ok().flatten();
                        if let Some(c) = daio.as_ref().filter(|c| c.exceeds) {
                            log::warn!(
                                "{} seed {seed}: DAIO first step {} exceeds the admissible bound {:.4} at lambda0 = {}",
                                env.label, c.configured_step, c.bound, c.lambda0
                            );
                        }
                    }
                }
                EnvironmentSummary {
                    scenario: env.label.clone(),
                    seed: *seed,
                    time_varying: env.schedule.is_some(),
                    slow_steps: env.slow_steps(),
                    inflation_rounds: Some(env.inflation_rounds),
                    inflated_violations: Some(env.inflated_violations),
                    v_lower: cfg.safety.v_lower,
                    baseline: baseline.clone(),
                    daio_step_check: daio,
                    error: baseline_error.clone(),
                }
            }
            Err(msg) => EnvironmentSummary {
                scenario: variant.label(),
                seed: *seed,
                time_varying: variant.is_time_varying(),
                slow_steps: 0,
                inflation_rounds: None,
                inflated_violations: None,
                v_lower: cfg.safety.v_lower,
                baseline: None,
                daio_step_check: None,
                error: Some(msg.clone()),
            },
        };
        environments.push(summary);
    }

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::with_capacity(outcomes.len());
    for (summary, records) in outcomes {
        runs.push(summary);
        traces.push(records);
    }
    let manifest = Manifest { config_hash: cfg.hash(), config: cfg.clone(), seeds: cfg.seeds.clone(), environments, runs };
    Ok(ExperimentResult { manifest, traces })
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Output(e.to_string()))?;
    if records.is_empty() {
        w.write_record(TRACE_HEADER.split(',')).map_err(|e| HarnessError::Output(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| HarnessError::Output(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|x| x.map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))).collect()
}

/// Executes `cfg` and writes `traces/<run_id>.csv` and `manifest.json` under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<(Manifest, PathBuf), HarnessError> {
    let mut result = execute(cfg)?;
    let trace_dir = out.join("traces");
    fs::create_dir_all(&trace_dir)?;
    for (run, records) in result.manifest.runs.iter_mut().zip(&result.traces) {
        if run.error.is_none() {
            let rel = format!("traces/{}.csv", run.run_id);
            write_trace(&out.join(&rel), records)?;
            run.trace = Some(rel);
        }
    }
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&result.manifest).map_err(|e| HarnessError::Output(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok((result.manifest, path))
}
