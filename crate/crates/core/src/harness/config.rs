use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, InflationConfig};
use crate::algorithms::{Algorithm, GradientSource, RampTrigger, StepSchedule, VoltageChannel, ZetaSampler, ZoConfig};
use crate::dynamics::BirthDeathConfig;
use crate::grid::SafetyMode;
use crate::response::ResponseFamily;

/// Which responses an experiment runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    QuadConvex,
    PolyConvex { degrees: Vec<u32> },
    PolyConcave { degrees: Vec<u32> },
    Step { devices: Vec<usize> },
    Linear,
    TvQuad {
        #[serde(default = "default_tv_devices")]
        devices: usize,
    },
    TvStep {
        #[serde(default = "default_tv_devices")]
        devices: usize,
    },
    TvLoadSeries {
        /// CSV with one row per minute and one column per PQ bus; synthesized when absent.
        #[serde(default)]
        table: Option<PathBuf>,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_tv_devices() -> usize {
    6
}

fn default_alpha() -> f64 {
    0.5
}

/// One concrete response setting produced by expanding a [`ScenarioKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Stationary { family: FamilySpec },
    TvQuad { devices: usize },
    TvStep { devices: usize },
    TvLoadSeries { table: Option<PathBuf>, alpha: f64 },
}

/// A response family without its per-instance data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Linear,
    QuadConvex,
    PolyConvex { degree: u32 },
    PolyConcave { degree: u32 },
    Step { devices: usize },
}

impl FamilySpec {
    pub fn label(&self) -> String {
        match self {
            Self::Linear => "linear".into(),
            Self::QuadConvex => "quad_convex".into(),
            Self::PolyConvex { degree } => format!("poly_convex_y{degree}"),
            Self::PolyConcave { degree } => format!("poly_concave_y{degree}"),
            Self::Step { devices } => format!("step_d{devices}"),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Self::Step { .. })
    }

    /// The family for closed-form shapes; step curves are generated separately.
    pub fn smooth_family(&self) -> Option<ResponseFamily<f64>> {
        match *self {
            Self::Linear => Some(ResponseFamily::Linear),
            Self::QuadConvex => Some(ResponseFamily::QuadraticConvex),
            Self::PolyConvex { degree } => Some(ResponseFamily::PolynomialConvex { degree }),
            Self::PolyConcave { degree } => Some(ResponseFamily::PolynomialConcave { degree }),
            Self::Step { .. } => None,
        }
    }
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Self::Stationary { family } => family.label(),
            Self::TvQuad { devices } => format!("tv_quad_d{devices}"),
            Self::TvStep { devices } => format!("tv_step_d{devices}"),
            Self::TvLoadSeries { alpha, .. } => format!("tv_load_series_a{alpha}"),
        }
    }

    pub fn is_time_varying(&self) -> bool {
        !matches!(self, Self::Stationary { .. })
    }

    pub fn is_quad_convex(&self) -> bool {
        matches!(self, Self::Stationary { family: FamilySpec::QuadConvex } | Self::TvQuad { .. } | Self::TvLoadSeries { .. })
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            Self::Stationary { family } => family.is_smooth(),
            Self::TvStep { .. } => false,
            _ => true,
        }
    }
}

impl ScenarioKind {
    pub fn variants(&self) -> Vec<Variant> {
        let st = |family| Variant::Stationary { family };
        match self {
            Self::QuadConvex => vec![st(FamilySpec::QuadConvex)],
            Self::Linear => vec![st(FamilySpec::Linear)],
            Self::PolyConvex { degrees } => degrees.iter().map(|&degree| st(FamilySpec::PolyConvex { degree })).collect(),
            Self::PolyConcave { degrees } => degrees.iter().map(|&degree| st(FamilySpec::PolyConcave { degree })).collect(),
            Self::Step { devices } => devices.iter().map(|&devices| st(FamilySpec::Step { devices })).collect(),
            Self::TvQuad { devices } => vec![Variant::TvQuad { devices: *devices }],
            Self::TvStep { devices } => vec![Variant::TvStep { devices: *devices }],
            Self::TvLoadSeries { table, alpha } => vec![Variant::TvLoadSeries { table: table.clone(), alpha: *alpha }],
        }
    }
}

/// How a coarse-gradient run estimates the thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// `min(t) / divisor` at every bus.
    MinOver { divisor: f64 },
    Min,
    Max,
    Mean,
    Uniform { value: f64 },
}

impl ThresholdRule {
    pub fn estimate(&self, t: &[f64]) -> Vec<f64> {
        let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let value = match *self {
            Self::MinOver { divisor } => min / divisor,
            Self::Min => min,
            Self::Max => max,
            Self::Mean => t.iter().sum::<f64>() / t.len() as f64,
            Self::Uniform { value } => value,
        };
        vec![value; t.len()]
    }

    fn label(&self) -> String {
        match self {
            Self::MinOver { divisor } => format!("min/{divisor}"),
            Self::Min => "min".into(),
            Self::Max => "max".into(),
            Self::Mean => "mean".into(),
            Self::Uniform { value } => format!("{value}"),
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let ok = match *self {
            Self::MinOver { divisor } => divisor > 0.0 && divisor.is_finite(),
            Self::Uniform { value } => value > 0.0 && value.is_finite(),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config("threshold estimate must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GradientSpec {
    Exact,
    LinearApprox,
    Coarse(ThresholdRule),
}

/// An algorithm as written in a config file; unset fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    Iii {
        #[serde(default)]
        step: Option<f64>,
        #[serde(default)]
        iterations: Option<usize>,
    },
    Daio {
        #[serde(default)]
        lambda0: Option<f64>,
        #[serde(default)]
        dual: Option<StepSchedule<f64>>,
        #[serde(default)]
        iterations: Option<usize>,
    },
    Foio {
        #[serde(default = "default_gradient")]
        gradient: GradientSpec,
        #[serde(default)]
        primal: Option<StepSchedule<f64>>,
        #[serde(default)]
        dual: Option<StepSchedule<f64>>,
        #[serde(default)]
        lambda0: Option<f64>,
        #[serde(default)]
        iterations: Option<usize>,
    },
    Zoio {
        /// Defaults to the smooth or step exploration radius of [`ZoSettings`].
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default)]
        iterations: Option<usize>,
    },
}

fn default_gradient() -> GradientSpec {
    GradientSpec::Exact
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Iii { .. } => "III".into(),
            Self::Daio { .. } => "DAIO".into(),
            Self::Foio { gradient, .. } => match gradient {
                GradientSpec::Exact => "FOIO-exact".into(),
                GradientSpec::LinearApprox => "FOIO-linear".into(),
                GradientSpec::Coarse(rule) => format!("FOIO-coarse({})", rule.label()),
            },
            Self::Zoio { .. } => "ZOIO".into(),
        }
    }

    pub fn iterations(&self) -> Option<usize> {
        match self {
            Self::Iii { iterations, .. }
            | Self::Daio { iterations, .. }
            | Self::Foio { iterations, .. }
            | Self::Zoio { iterations, .. } => *iterations,
        }
    }

    /// The concrete optimizer for a scenario with thresholds `t`.
    pub fn build(&self, t: &[f64], smooth: bool, zo: &ZoSettings) -> Algorithm<f64> {
        match self {
            Self::Iii { step, .. } => Algorithm::Iii { step: step.unwrap_or(0.1) },
            Self::Daio { lambda0, dual, .. } => {
                let Algorithm::Daio { dual: d0, lambda0: l0 } = Algorithm::<f64>::daio() else { unreachable!() };
                Algorithm::Daio { dual: dual.clone().unwrap_or(d0), lambda0: lambda0.unwrap_or(l0) }
            }
            Self::Foio { gradient, primal, dual, lambda0, .. } => {
                let source = match gradient {
                    GradientSpec::Exact => GradientSource::Exact,
                    GradientSpec::LinearApprox => GradientSource::LinearApprox,
                    GradientSpec::Coarse(rule) => GradientSource::Coarse { t_est: rule.estimate(t) },
                };
                let Algorithm::Foio { primal: p0, dual: d0, lambda0: l0, .. } = Algorithm::<f64>::foio(GradientSource::Exact) else {
                    unreachable!()
                };
                Algorithm::Foio {
                    gradient: source,
                    primal: primal.clone().unwrap_or(p0),
                    dual: dual.clone().unwrap_or(d0),
                    lambda0: lambda0.unwrap_or(l0),
                }
            }
            Self::Zoio { sigma, .. } => {
                let default_sigma = if smooth { zo.sigma_smooth } else { zo.sigma_step };
                Algorithm::Zoio {
                    config: ZoConfig {
                        sigma: sigma.unwrap_or(default_sigma),
                        p: zo.p,
                        decay: zo.decay,
                        zeta: zo.zeta,
                        noise: zo.noise,
                    },
                    primal_step: zo.primal_step,
                    dual: zo.dual.clone(),
                    lambda0: 0.0,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoSettings {
    pub sigma_smooth: f64,
    pub sigma_step: f64,
    pub primal_step: f64,
    pub p: f64,
    pub decay: f64,
    pub zeta: ZetaSampler,
    pub noise: f64,
    pub dual: StepSchedule<f64>,
}

impl Default for ZoSettings {
    fn default() -> Self {
        Self {
            sigma_smooth: 0.005,
            sigma_step: 0.1,
            primal_step: 0.0001,
            p: 0.0,
            decay: 0.95,
            zeta: ZetaSampler::Uniform,
            noise: 0.0,
            dual: StepSchedule::ramp(RampTrigger::OnViolationBeforeFirstFeasible),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetySettings {
    pub v_lower: f64,
    pub v_upper: f64,
    pub mode: SafetyMode,
}

impl Default for SafetySettings {
    fn default() -> Self {
        Self { v_lower: 0.9, v_upper: 1.1, mode: SafetyMode::LowerOnly }
    }
}

/// Synthetic base loads: per-bus log-uniform multiples of the case's nominal loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadSettings {
    pub band: (f64, f64),
    /// Required clearance of the base-load AC voltages above the lower bound.
    pub margin: f64,
    /// Per-minute log-volatility of synthesized load tables.
    pub volatility: f64,
}

impl Default for LoadSettings {
    fn default() -> Self {
        Self { band: (0.003, 0.03), margin: 0.0, volatility: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Feeder JSON; the embedded IEEE 33-bus case when absent.
    #[serde(default)]
    pub case: Option<PathBuf>,
    pub scenarios: Vec<ScenarioKind>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub safety: SafetySettings,
    #[serde(default)]
    pub loads: LoadSettings,
    #[serde(default)]
    pub inflation: InflationConfig,
    #[serde(default)]
    pub dynamics: BirthDeathConfig,
    #[serde(default)]
    pub zo: ZoSettings,
    #[serde(default)]
    pub channel: VoltageChannel,
    /// Convex-oracle KKT tolerance.
    #[serde(default = "default_oracle_tol")]
    pub oracle_tolerance: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_oracle_tol() -> f64 {
    1e-6
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Parses TOML or JSON, chosen by extension (`.json` is JSON, anything else TOML).
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let (Some(case), Some(dir)) = (cfg.case.as_mut(), path.parent()) {
            if case.is_relative() {
                *case = dir.join(&*case);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn variants(&self) -> Vec<Variant> {
        self.scenarios.iter().flat_map(ScenarioKind::variants).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.scenarios.is_empty() || self.algorithms.is_empty() {
            return bad("at least one scenario and one algorithm are required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let variants = self.variants();
        if variants.is_empty() {
            return bad("scenario lists expand to no variants".into());
        }
        for v in &variants {
            match v {
                Variant::Stationary { family: FamilySpec::Step { devices } } | Variant::TvQuad { devices } | Variant::TvStep { devices } => {
                    if *devices < 2 {
                        return bad(format!("{}: step responses need at least 2 devices", v.label()));
                    }
                }
                Variant::Stationary { family: FamilySpec::PolyConvex { degree } | FamilySpec::PolyConcave { degree } } => {
                    if *degree < 2 || degree % 2 != 0 {
                        return bad(format!("{}: degree must be an even integer >= 2", v.label()));
                    }
                }
                Variant::TvLoadSeries { alpha, .. } => {
                    if !(*alpha > 0.0 && *alpha <= 1.0) {
                        return bad(format!("alpha must lie in (0, 1], got {alpha}"));
                    }
                }
                _ => {}
            }
        }
        for a in &self.algorithms {
            if a.iterations() == Some(0) {
                return bad(format!("{}: iterations must be at least 1", a.label()));
            }
            if matches!(a, AlgorithmSpec::Daio { .. }) {
                if let Some(v) = variants.iter().find(|v| !v.is_quad_convex()) {
                    return bad(format!("DAIO needs a quadratic-convex response, scenario {} is not", v.label()));
                }
            }
            if let AlgorithmSpec::Foio { gradient: GradientSpec::Coarse(rule), .. } = a {
                rule.validate()?;
            }
            let algorithm = a.build(&[1.0], true, &self.zo);
            algorithm.validate().map_err(|e| HarnessError::Config(format!("{}: {e}", a.label())))?;
        }
        let (lo, hi) = self.loads.band;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("load band must satisfy 0 < low <= high".into());
        }
        if !(self.loads.volatility >= 0.0) {
            return bad("load volatility must be non-negative".into());
        }
        if !(self.safety.v_lower >= 0.0 && self.safety.v_lower < self.safety.v_upper) {
            return bad("safety bounds must satisfy 0 <= v_lower < v_upper".into());
        }
        if self.safety.mode != SafetyMode::LowerOnly {
            return bad("only lower-only safety is supported by the optimizers".into());
        }
        if !(self.oracle_tolerance > 0.0) {
            return bad("oracle_tolerance must be positive".into());
        }
        self.dynamics.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}
