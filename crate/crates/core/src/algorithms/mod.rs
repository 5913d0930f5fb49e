//! Feedback incentive optimizers and their shared machinery.

mod daio;
mod foio;
mod iii;
mod plant;
mod schedule;
mod zoio;

pub use daio::{daio_dual_value, daio_primal, daio_step, daio_step_condition};
pub use foio::{foio_primal_gradient, foio_step, foio_theoretical_schedule, GradientSource};
pub use iii::iii_step;
pub use plant::{Measurement, Plant, VoltageChannel};
pub use schedule::{PsiNorm, RampTrigger, StepSchedule};
pub use zoio::{zeta_estimator_bias_check, zoio_step, ZetaSampler, ZoConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::GridError;
use crate::linalg;
use crate::response::ResponseError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgorithmError {
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("closed-form update is degenerate at bus {bus}")]
    Degenerate { bus: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Primal-dual iterate plus the bookkeeping step rules need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AlgorithmState<T> {
    pub incentive: Vec<T>,
    pub dual: Vec<T>,
    pub iteration: usize,
    /// Primal block of `ψ` from the latest gradient step.
    pub last_gradient: Vec<T>,
    /// `h` measured at the current incentive, when known.
    pub last_h: Option<Vec<T>>,
    pub feasible_seen: bool,
    /// Current dual step of a ramp schedule.
    pub dual_step: T,
    /// Set when the diminishing schedule met a zero `ψ`.
    pub stationary: bool,
}

impl<T: Scalar> AlgorithmState<T> {
    pub fn new(n: usize, lambda0: T, dual_step: T) -> Self {
        Self {
            incentive: vec![T::zero(); n],
            dual: vec![lambda0.max(T::zero()); n],
            iteration: 0,
            last_gradient: vec![T::zero(); n],
            last_h: None,
            feasible_seen: false,
            dual_step,
            stationary: false,
        }
    }

    pub fn n(&self) -> usize {
        self.incentive.len()
    }

    pub(crate) fn record_dual_outcome(&mut self, schedule: &StepSchedule<T>, h: Vec<T>) {
        let violated = h.iter().any(|&x| x > T::zero());
        self.dual_step = schedule.advance(self.dual_step, violated, self.feasible_seen);
        self.feasible_seen |= !violated;
        self.last_h = Some(h);
        self.iteration += 1;
    }
}

/// Incentive cost `‖i‖₁` for `i ⪰ 0`.
pub fn cost<T: Scalar>(i: &[T]) -> T {
    linalg::sum(i)
}

/// `c(i) + λᵀh(g(i))`, optionally with `+ p/2‖i‖² − d/2‖λ‖²`.
pub fn lagrangian<T: Scalar>(i: &[T], lambda: &[T], plant: &Plant<T>, regularization: Option<(T, T)>) -> Result<T, AlgorithmError> {
    let h = plant.h(i)?;
    let mut value = cost(i) + linalg::dot(lambda, &h);
    if let Some((p, d)) = regularization {
        let half = T::lit(0.5);
        value += half * p * linalg::dot(i, i) - half * d * linalg::dot(lambda, lambda);
    }
    Ok(value)
}

fn project<T: Scalar>(v: &mut [T]) {
    linalg::project_nonneg(v)
}

/// An optimizer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "algorithm", rename_all = "kebab-case")]
pub enum Algorithm<T> {
    Iii { step: T },
    Daio { dual: StepSchedule<T>, lambda0: T },
    Foio { gradient: GradientSource<T>, primal: StepSchedule<T>, dual: StepSchedule<T>, lambda0: T },
    Zoio { config: ZoConfig<T>, primal_step: T, dual: StepSchedule<T>, lambda0: T },
}

impl<T: Scalar> Algorithm<T> {
    pub fn iii() -> Self {
        Self::Iii { step: T::lit(0.1) }
    }

    pub fn daio() -> Self {
        Self::Daio { dual: StepSchedule::ramp(RampTrigger::OnViolation), lambda0: T::lit(0.01) }
    }

    pub fn foio(gradient: GradientSource<T>) -> Self {
        Self::Foio {
            gradient,
            primal: StepSchedule::constant(T::lit(0.0005)),
            dual: StepSchedule::ramp(RampTrigger::OnViolation),
            lambda0: T::zero(),
        }
    }

    pub fn zoio(sigma: T) -> Self {
        Self::Zoio {
            config: ZoConfig::with_sigma(sigma),
            primal_step: T::lit(0.0001),
            dual: StepSchedule::ramp(RampTrigger::OnViolationBeforeFirstFeasible),
            lambda0: T::zero(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Iii { .. } => "III",
            Self::Daio { .. } => "DAIO",
            Self::Foio { .. } => "FOIO",
            Self::Zoio { .. } => "ZOIO",
        }
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let positive = |x: T, what: &str| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(AlgorithmError::InvalidConfig(format!("{what} must be positive")))
            }
        };
        match self {
            Self::Iii { step } => positive(*step, "III step"),
            Self::Daio { dual, lambda0 } => {
                dual.validate()?;
                positive(*lambda0, "DAIO initial dual")
            }
            Self::Foio { primal, dual, lambda0, .. } => {
                primal.validate()?;
                dual.validate()?;
                if matches!(primal, StepSchedule::DualRamp { .. }) {
                    return Err(AlgorithmError::InvalidConfig("FOIO primal step cannot be a dual ramp".into()));
                }
                non_negative(*lambda0)
            }
            Self::Zoio { config, primal_step, dual, lambda0 } => {
                config.validate()?;
                positive(*primal_step, "ZOIO primal step")?;
                dual.validate()?;
                if dual.is_diminishing() {
                    return Err(AlgorithmError::InvalidConfig("ZOIO dual step must be constant or a ramp".into()));
                }
                non_negative(*lambda0)
            }
        }
    }

    fn initial_state(&self, n: usize) -> AlgorithmState<T> {
        match self {
            Self::Iii { .. } => AlgorithmState::new(n, T::zero(), T::zero()),
            Self::Daio { dual, lambda0 } | Self::Foio { dual, lambda0, .. } | Self::Zoio { dual, lambda0, .. } => {
                AlgorithmState::new(n, *lambda0, dual.initial())
            }
        }
    }
}

fn non_negative<T: Scalar>(x: T) -> Result<(), AlgorithmError> {
    if x >= T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(AlgorithmError::InvalidConfig("initial dual must be non-negative".into()))
    }
}

/// A running optimizer: configuration, iterate and a private random stream.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub algorithm: Algorithm<T>,
    pub state: AlgorithmState<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(algorithm: Algorithm<T>, n: usize, seed: u64) -> Result<Self, AlgorithmError> {
        algorithm.validate()?;
        let state = algorithm.initial_state(n);
        Ok(Self { algorithm, state, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Advances one iteration against `plant` and returns the measurement at the new incentive.
    pub fn step(&mut self, plant: &Plant<T>) -> Result<Measurement<T>, AlgorithmError> {
        if plant.n() != self.state.n() {
            return Err(AlgorithmError::DimensionMismatch { expected: self.state.n(), got: plant.n() });
        }
        match &self.algorithm {
            Algorithm::Iii { step } => iii_step(&mut self.state, plant, *step),
            Algorithm::Daio { dual, .. } => daio_step(&mut self.state, plant, dual),
            Algorithm::Foio { gradient, primal, dual, .. } => foio_step(&mut self.state, plant, gradient, primal, dual),
            Algorithm::Zoio { config, primal_step, dual, .. } => {
                zoio_step(&mut self.state, plant, config, *primal_step, dual, &mut self.rng)
            }
        }
    }
}

#[cfg(test)]
mod tests;
