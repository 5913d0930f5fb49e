//! Scenario construction, experiment execution and output.

pub mod config;
pub mod plot;
pub mod runner;
pub mod scenario;

pub use config::{AlgorithmSpec, ExperimentConfig, FamilySpec, GradientSpec, LoadSettings, SafetySettings, ScenarioKind, ThresholdRule, Variant, ZoSettings};
pub use plot::{emit_plots, render_svg, Series};
pub use runner::{
    build_environment, compute_baseline, daio_step_check, derive_seed, execute, load_case, read_trace, run_algorithm, run_experiment, run_id,
    write_trace, Baseline, BaselineKind, DaioStepCheck, Environment, EnvironmentSummary, ExperimentResult, Manifest, RunSummary, TraceRecord,
    TRACE_HEADER,
};
pub use scenario::{
    count_lower_violations, inflate_demand, nominal_q_ratio, sample_thresholds, synthetic_base_loads, synthetic_load_table, Inflation,
    InflationConfig, ScenarioInstance,
};

use crate::algorithms::AlgorithmError;
use crate::baseline::BaselineError;
use crate::grid::GridError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}
