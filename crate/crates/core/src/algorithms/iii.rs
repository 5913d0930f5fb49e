use super::{project, AlgorithmError, AlgorithmState, Measurement, Plant};
use crate::scalar::Scalar;

/// `i ← [i + ε (g(i) − u★)]₊`.
pub fn iii_step<T: Scalar>(state: &mut AlgorithmState<T>, plant: &Plant<T>, step: T) -> Result<Measurement<T>, AlgorithmError> {
    let g = plant.demand(&state.incentive)?;
    for ((i, g), u) in state.incentive.iter_mut().zip(&g).zip(&plant.response.params.u_star) {
        *i += step * (*g - *u);
    }
    project(&mut state.incentive);
    let m = plant.measure(&state.incentive)?;
    state.feasible_seen |= m.feasible();
    state.last_h = Some(m.h.clone());
    state.iteration += 1;
    Ok(m)
}
