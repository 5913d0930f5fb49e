use super::{lagrangian, project, AlgorithmError, AlgorithmState, Measurement, Plant, StepSchedule};
use crate::linalg;
use crate::response::ResponseFamily;
use crate::scalar::Scalar;

/// Minimizer of `L(·, λ)` for a quadratic-convex response:
/// `i = t − 1 ⊘ (2b ⊙ Rᵀλ)`, clipped to `[0, t]`.
pub fn daio_primal<T: Scalar>(plant: &Plant<T>, lambda: &[T]) -> Result<Vec<T>, AlgorithmError> {
    plant.require_lower_only()?;
    if plant.response.family != ResponseFamily::QuadraticConvex {
        return Err(AlgorithmError::Precondition("the closed-form update needs a quadratic-convex response".into()));
    }
    let n = plant.n();
    if lambda.iter().all(|&l| l == T::zero()) {
        return Ok(vec![T::zero(); n]);
    }
    let w = plant.weighted_dual(lambda);
    let t = &plant.response.params.t;
    let mut i = Vec::with_capacity(n);
    for j in 0..n {
        let b = plant.response.coefficient(j);
        if b == T::zero() {
            i.push(T::zero());
            continue;
        }
        let denom = T::lit(2.0) * b * w[j];
        if !(denom > T::zero()) || !denom.is_finite() {
            return Err(AlgorithmError::Degenerate { bus: j });
        }
        i.push((t[j] - denom.recip()).max(T::zero()).min(t[j]));
    }
    Ok(i)
}

/// Dual function `m(λ) = min_i L(i, λ)`.
pub fn daio_dual_value<T: Scalar>(plant: &Plant<T>, lambda: &[T]) -> Result<T, AlgorithmError> {
    let i = daio_primal(plant, lambda)?;
    lagrangian(&i, lambda, plant, None)
}

/// Largest dual step `2 m(λ⁰) / ‖h(g(i⁰))‖²` for which dual ascent provably converges.
/// A non-positive value means no step satisfies the condition.
pub fn daio_step_condition<T: Scalar>(lambda0: &[T], h0: &[T], dual_value: impl Fn(&[T]) -> T) -> T {
    let norm_sq = linalg::dot(h0, h0);
    T::lit(2.0) * dual_value(lambda0) / norm_sq
}

pub fn daio_step<T: Scalar>(
    state: &mut AlgorithmState<T>,
    plant: &Plant<T>,
    schedule: &StepSchedule<T>,
) -> Result<Measurement<T>, AlgorithmError> {
    state.incentive = daio_primal(plant, &state.dual)?;
    let m = plant.measure(&state.incentive)?;
    let eps = match schedule {
        StepSchedule::Constant { step } => *step,
        _ => state.dual_step,
    };
    for (l, h) in state.dual.iter_mut().zip(&m.h) {
        *l += eps * *h;
    }
    project(&mut state.dual);
    state.record_dual_outcome(schedule, m.h.clone());
    Ok(m)
}
