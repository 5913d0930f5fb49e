use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use incentive_core::harness::{
    build_environment, daio_step_check, emit_plots, load_case, run_experiment, AlgorithmSpec, ExperimentConfig, HarnessError,
};
use incentive_core::algorithms::StepSchedule;

#[derive(Parser)]
#[command(name = "incentive-sim", version, about = "Feedback optimization of grid incentives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario and algorithm in a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and its step-size conditions without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render SVG plots from a manifest.
    Plot {
        #[arg(long)]
        manifest: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => Self::Config(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    cfg.validate()?;
    let (manifest, path) = run_experiment(&cfg, &cfg.output_dir)?;
    for r in &manifest.runs {
        match (&r.error, r.final_cost) {
            (Some(e), _) => println!("{:<48} error: {e}", r.run_id),
            (None, Some(c)) => println!(
                "{:<48} cost {c:>10.5}  gap {:>10}  feasible {}",
                r.run_id,
                r.final_gap.map_or("-".into(), |g| format!("{g:.5}")),
                r.final_feasible.unwrap_or(false)
            ),
            _ => {}
        }
    }
    println!("manifest: {}", path.display());
    match manifest.failed_runs() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!("{n} runs or scenarios failed"))),
    }
}

fn validate(config: PathBuf) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&config)?;
    println!("config ok: {} scenario variants, {} algorithms, seeds {:?}", cfg.variants().len(), cfg.algorithms.len(), cfg.seeds);
    for spec in &cfg.algorithms {
        if let AlgorithmSpec::Foio { primal: Some(StepSchedule::SquareSummable { .. }), .. } = spec {
            println!("{}: diminishing primal step (square summable, not summable)", spec.label());
        }
    }
    let case = load_case(&cfg)?;
    let seed = cfg.seeds[0];
    for variant in cfg.variants() {
        let env = build_environment(&cfg, &case, &variant, seed)?;
        println!("{} (seed {seed}): {} inflation rounds, {} buses below the lower bound at zero incentive", env.label, env.inflation_rounds, env.inflated_violations);
        for spec in &cfg.algorithms {
            let algorithm = spec.build(env.thresholds(), env.variant.is_smooth(), &cfg.zo);
            if let Some(c) = daio_step_check(&env.base, &algorithm)? {
                let verdict = if c.exceeds { "WARNING: exceeds" } else { "within" };
                println!("  {}: first dual step {} {verdict} the admissible bound {:.6} at lambda0 = {}", spec.label(), c.configured_step, c.bound, c.lambda0);
            }
        }
    }
    Ok(())
}

fn plot(manifest: PathBuf) -> Result<(), Failure> {
    for p in emit_plots(&manifest)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(config, seed, out),
        Command::Validate { config } => validate(config),
        Command::Plot { manifest } => plot(manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
    }
}
