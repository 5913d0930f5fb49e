use serde::{Deserialize, Serialize};

use super::{project, AlgorithmError, AlgorithmState, Measurement, Plant, PsiNorm, StepSchedule};
use crate::linalg;
use crate::response::coarse_gradient;
use crate::scalar::Scalar;

/// Where FOIO gets `∇g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "kebab-case")]
pub enum GradientSource<T> {
    Exact,
    /// Gradient of the linear interpolation through `(0, u★+δ)` and `(t, u★)`,
    /// flat beyond `t`.
    LinearApprox,
    /// Linear-interpolation gradient built on a threshold estimate.
    Coarse { t_est: Vec<T> },
}

/// `∇_i L = 1 + ∇g ⊙ Rᵀλ` under the chosen gradient source.
pub fn foio_primal_gradient<T: Scalar>(
    plant: &Plant<T>,
    source: &GradientSource<T>,
    i: &[T],
    lambda: &[T],
) -> Result<Vec<T>, AlgorithmError> {
    plant.require_lower_only()?;
    let params = &plant.response.params;
    let dg = match source {
        GradientSource::Exact => plant.response.gradient(i)?,
        GradientSource::LinearApprox => plant.response.linear_approximation().gradient(i)?,
        GradientSource::Coarse { t_est } => coarse_gradient(params, t_est)?,
    };
    let w = plant.weighted_dual(lambda);
    Ok(dg.iter().zip(&w).map(|(&d, &w)| T::one() + d * w).collect())
}

/// Diminishing step `γ_k / ‖ψ_k‖` with `γ_k = c/k`. Returns zero and flags
/// stationarity when `ψ` vanishes.
pub fn foio_theoretical_schedule<T: Scalar>(state: &mut AlgorithmState<T>, c: T, norm: PsiNorm) -> T {
    let k = T::from_count(state.iteration + 1);
    let mut sq = linalg::dot(&state.last_gradient, &state.last_gradient);
    if norm == PsiNorm::Stacked {
        if let Some(h) = &state.last_h {
            sq += linalg::dot(h, h);
        }
    }
    if sq == T::zero() {
        state.stationary = true;
        return T::zero();
    }
    state.stationary = false;
    c / k / sq.sqrt()
}

pub fn foio_step<T: Scalar>(
    state: &mut AlgorithmState<T>,
    plant: &Plant<T>,
    source: &GradientSource<T>,
    primal: &StepSchedule<T>,
    dual: &StepSchedule<T>,
) -> Result<Measurement<T>, AlgorithmError> {
    let grad = foio_primal_gradient(plant, source, &state.incentive, &state.dual)?;
    state.last_gradient = grad;
    let diminishing = [primal, dual].into_iter().find_map(|s| match s {
        StepSchedule::SquareSummable { c, norm } => Some((*c, *norm)),
        _ => None,
    });
    let theoretical = match diminishing {
        Some((c, norm)) => {
            if state.last_h.is_none() && norm == PsiNorm::Stacked {
                state.last_h = Some(plant.h(&state.incentive)?);
            }
            foio_theoretical_schedule(state, c, norm)
        }
        None => T::zero(),
    };
    let eps_p = match primal {
        StepSchedule::Constant { step } => *step,
        _ => theoretical,
    };
    let eps_d = match dual {
        StepSchedule::Constant { step } => *step,
        StepSchedule::DualRamp { .. } => state.dual_step,
        StepSchedule::SquareSummable { .. } => theoretical,
    };
    for (i, g) in state.incentive.iter_mut().zip(&state.last_gradient) {
        *i -= eps_p * *g;
    }
    project(&mut state.incentive);
    let m = plant.measure(&state.incentive)?;
    for (l, h) in state.dual.iter_mut().zip(&m.h) {
        *l += eps_d * *h;
    }
    project(&mut state.dual);
    state.record_dual_outcome(dual, m.h.clone());
    Ok(m)
}
