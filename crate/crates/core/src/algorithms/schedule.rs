use serde::{Deserialize, Serialize};

use super::AlgorithmError;
use crate::scalar::Scalar;

/// When a dual ramp raises its step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampTrigger {
    #[default]
    OnViolation,
    OnViolationBeforeFirstFeasible,
}

/// Which gradient blocks enter `‖ψ‖` for the diminishing schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiNorm {
    #[default]
    Stacked,
    PrimalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule<T> {
    Constant { step: T },
    DualRamp { start: T, increment: T, trigger: RampTrigger },
    /// `ε_k = (c/k) / ‖ψ_k‖`.
    SquareSummable { c: T, norm: PsiNorm },
}

impl<T: Scalar> StepSchedule<T> {
    pub fn constant(step: T) -> Self {
        Self::Constant { step }
    }

    pub fn ramp(trigger: RampTrigger) -> Self {
        Self::DualRamp { start: T::one(), increment: T::lit(0.1), trigger }
    }

    pub fn harmonic() -> Self {
        Self::SquareSummable { c: T::one(), norm: PsiNorm::Stacked }
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let ok = match self {
            Self::Constant { step } => *step > T::zero() && step.is_finite(),
            Self::DualRamp { start, increment, .. } => {
                *start > T::zero() && start.is_finite() && *increment >= T::zero() && increment.is_finite()
            }
            Self::SquareSummable { c, .. } => *c > T::zero() && c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(AlgorithmError::InvalidConfig(format!("step schedule {self:?} must be positive and finite")))
        }
    }

    /// Step used before any update.
    pub fn initial(&self) -> T {
        match self {
            Self::Constant { step } => *step,
            Self::DualRamp { start, .. } => *start,
            Self::SquareSummable { .. } => T::zero(),
        }
    }

    /// Step after observing whether the latest iterate violated the constraints.
    pub fn advance(&self, current: T, violated: bool, feasible_seen: bool) -> T {
        match self {
            Self::DualRamp { increment, trigger, .. } => {
                let fire = match trigger {
                    RampTrigger::OnViolation => violated,
                    RampTrigger::OnViolationBeforeFirstFeasible => violated && !feasible_seen,
                };
                if fire {
                    current + *increment
                } else {
                    current
                }
            }
            _ => current,
        }
    }

    pub fn is_diminishing(&self) -> bool {
        matches!(self, Self::SquareSummable { .. })
    }
}
