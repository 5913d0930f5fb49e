use super::{lower_only, lp_optimum, violated_at_threshold, BaselineError, Optimum};
use crate::algorithms::{cost, Plant};
use crate::linalg::{self, Matrix};
use crate::response::ResponseFamily;
use crate::scalar::Scalar;

/// Worst KKT violation of `(i, λ)`: projected stationarity of
/// `1 + ∇g ⊙ Rᵀλ` on `[0, t]`, primal and dual feasibility, and `|λ_a h_a|`.
pub fn convex_kkt_residual<T: Scalar>(plant: &Plant<T>, i: &[T], lambda: &[T]) -> Result<T, BaselineError> {
    let model = plant.as_model();
    let h = model.h(i)?;
    let w = model.weighted_dual(lambda);
    let t = &plant.response.params.t;
    let mut worst = T::zero();
    for j in 0..i.len() {
        let stat = T::one() + plant.response.derivative_at(j, i[j]).map_err(crate::algorithms::AlgorithmError::from)? * w[j];
        let projected = (i[j] - stat).max(T::zero()).min(t[j]);
        worst = worst.max((i[j] - projected).abs());
    }
    for (&l, &hv) in lambda.iter().zip(&h) {
        worst = worst.max(hv).max(-l).max((l * hv).abs());
    }
    Ok(worst)
}

struct Problem<'a, T> {
    plant: &'a Plant<T>,
    r: &'a Matrix<T>,
    t: &'a [T],
    vars: Vec<usize>,
}

impl<T: Scalar> Problem<'_, T> {
    fn h(&self, i: &[T]) -> Vec<T> {
        self.plant.h(i).expect("dimensions checked")
    }

    fn d1(&self, j: usize, x: T) -> T {
        self.plant.response.derivative_at(j, x).expect("smooth family")
    }

    fn d2(&self, j: usize, x: T) -> T {
        self.plant.response.curvature_at(j, x).expect("smooth family")
    }

    fn in_box(&self, i: &[T]) -> bool {
        self.vars.iter().all(|&j| i[j] > T::zero() && i[j] < self.t[j])
    }

    fn barrier(&self, i: &[T], tau: T) -> T {
        let h = self.h(i);
        let mut f = tau * cost(i);
        for &x in &h {
            f -= (-x).ln();
        }
        for &j in &self.vars {
            f -= i[j].ln() + (self.t[j] - i[j]).ln();
        }
        f
    }

    /// Newton centering of the log-barrier at weight `tau`.
    fn center(&self, i: &mut [T], tau: T) {
        let nv = self.vars.len();
        for _ in 0..100 {
            let h = self.h(i);
            let d1: Vec<T> = self.vars.iter().map(|&j| self.d1(j, i[j])).collect();
            let d2: Vec<T> = self.vars.iter().map(|&j| self.d2(j, i[j])).collect();
            let mut grad = vec![T::zero(); nv];
            let mut hess = Matrix::<T>::zeros(nv, nv);
            let mut diag = vec![T::zero(); nv];
            for (a, &ha) in h.iter().enumerate() {
                let s = -ha;
                let row: Vec<T> = self.vars.iter().enumerate().map(|(k, &j)| self.r[(a, j)] * d1[k]).collect();
                for k in 0..nv {
                    grad[k] += row[k] / s;
                    diag[k] += self.r[(a, self.vars[k])] * d2[k] / s;
                }
                let s2 = s * s;
                hess = Matrix::from_fn(nv, nv, |p, q| hess[(p, q)] + row[p] * row[q] / s2);
            }
            for (k, &j) in self.vars.iter().enumerate() {
                let lo = i[j];
                let hi = self.t[j] - i[j];
                grad[k] += tau - lo.recip() + hi.recip();
                diag[k] += (lo * lo).recip() + (hi * hi).recip();
            }
            let hess = Matrix::from_fn(nv, nv, |p, q| hess[(p, q)] + if p == q { diag[p] } else { T::zero() });
            let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
            let Ok(step) = hess.solve(&neg) else { return };
            let decrement = -linalg::dot(&grad, &step);
            if !(decrement > T::lit(1e-12)) {
                return;
            }
            let f0 = self.barrier(i, tau);
            let mut s = T::one();
            let mut trial = i.to_vec();
            loop {
                for (k, &j) in self.vars.iter().enumerate() {
                    trial[j] = i[j] + s * step[k];
                }
                if self.in_box(&trial)
                    && self.h(&trial).iter().all(|&x| x < T::zero())
                    && self.barrier(&trial, tau) <= f0 - T::lit(0.25) * s * decrement
                {
                    break;
                }
                s *= T::lit(0.5);
                if s < T::lit(1e-14) {
                    return;
                }
            }
            i.copy_from_slice(&trial);
        }
    }

    /// Primal-dual active-set Newton on the KKT system, started from the barrier iterate.
    fn active_set(&self, i0: &[T], lambda0: &[T], tau: T) -> Option<(Vec<T>, Vec<T>)> {
        let n = i0.len();
        let cutoff = tau.sqrt().recip();
        let h0 = self.h(i0);
        let mut active: Vec<bool> = (0..n).map(|a| lambda0[a] > -h0[a]).collect();
        let mut free: Vec<bool> = (0..n).map(|j| self.vars.contains(&j) && i0[j] > cutoff).collect();
        let mut i = i0.to_vec();
        let mut lambda = lambda0.to_vec();
        for _ in 0..30 {
            for j in 0..n {
                if !free[j] {
                    i[j] = T::zero();
                }
            }
            for a in 0..n {
                if !active[a] {
                    lambda[a] = T::zero();
                }
            }
            let fv: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
            let av: Vec<usize> = (0..n).filter(|&a| active[a]).collect();
            let size = fv.len() + av.len();
            for _ in 0..50 {
                let h = self.h(&i);
                let w = self.plant.weighted_dual(&lambda);
                let mut res = Vec::with_capacity(size);
                for &j in &fv {
                    res.push(-(T::one() + self.d1(j, i[j]) * w[j]));
                }
                for &a in &av {
                    res.push(-h[a]);
                }
                if linalg::norm_inf(&res) < T::epsilon() * T::lit(64.0) {
                    break;
                }
                let jac = Matrix::from_fn(size, size, |p, q| {
                    match (p < fv.len(), q < fv.len()) {
                        (true, true) => {
                            if p == q {
                                self.d2(fv[p], i[fv[p]]) * w[fv[p]]
                            } else {
                                T::zero()
                            }
                        }
                        (true, false) => self.r[(av[q - fv.len()], fv[p])] * self.d1(fv[p], i[fv[p]]),
                        (false, true) => self.r[(av[p - fv.len()], fv[q])] * self.d1(fv[q], i[fv[q]]),
                        (false, false) => T::zero(),
                    }
                });
                let step = jac.solve(&res).ok()?;
                for (k, &j) in fv.iter().enumerate() {
                    i[j] = (i[j] + step[k]).min(self.t[j]);
                }
                for (k, &a) in av.iter().enumerate() {
                    lambda[a] += step[fv.len() + k];
                }
                if !i.iter().chain(&lambda).all(|x| x.is_finite()) {
                    return None;
                }
            }
            let h = self.h(&i);
            let w = self.plant.weighted_dual(&lambda);
            let slack = T::epsilon().sqrt();
            let mut changed = false;
            for a in 0..n {
                if active[a] && lambda[a] < T::zero() {
                    active[a] = false;
                    changed = true;
                } else if !active[a] && h[a] > slack * T::lit(1e-3) {
                    active[a] = true;
                    changed = true;
                }
            }
            for &j in &self.vars {
                if free[j] && i[j] < T::zero() {
                    free[j] = false;
                    changed = true;
                } else if !free[j] && T::one() + self.d1(j, T::zero()) * w[j] < T::zero() {
                    free[j] = true;
                    i[j] = cutoff;
                    changed = true;
                }
            }
            if !changed {
                return Some((i, lambda));
            }
        }
        None
    }
}

/// Optimum of a smooth convex response. A log-barrier Newton path supplies
/// a near-central point and active-set guess; an active-set Newton polish then
/// solves the KKT system, and the result is certified against `tol`.
pub fn convex_optimum<T: Scalar>(plant: &Plant<T>, tol: T) -> Result<Optimum<T>, BaselineError> {
    lower_only(plant)?;
    match plant.response.family {
        ResponseFamily::Linear => return lp_optimum(plant),
        ResponseFamily::QuadraticConvex | ResponseFamily::PolynomialConvex { .. } => {}
        _ => return Err(BaselineError::Unsupported(format!("{} is not a smooth convex response", plant.response.family.name()))),
    }
    let model = plant.as_model();
    let n = model.n();
    let t = &model.response.params.t;
    let violated = violated_at_threshold(&model)?;
    if !violated.is_empty() {
        return Err(BaselineError::Infeasible { violated_rows: violated });
    }
    let zero = vec![T::zero(); n];
    if linalg::max(&model.h(&zero)?) <= T::zero() {
        return Ok(Optimum { incentive: zero.clone(), cost: T::zero(), dual: zero, kkt_residual: T::zero(), certified: true });
    }
    let h_t = model.h(t)?;
    let margin = linalg::max(&h_t);
    if margin > -T::epsilon() {
        // Only `i = t` is feasible.
        let kkt = convex_kkt_residual(&model, t, &zero)?;
        return Ok(Optimum { incentive: t.clone(), cost: cost(t), dual: zero, kkt_residual: kkt, certified: kkt <= tol });
    }
    let vars: Vec<usize> = (0..n).filter(|&j| model.response.params.delta[j] > T::zero()).collect();
    let problem = Problem { plant: &model, r: &model.sensitivity.r, t, vars };

    let mut theta = T::lit(0.5);
    let mut i: Vec<T> = t.iter().map(|&x| x * theta).collect();
    while linalg::max(&model.h(&i)?) >= T::lit(0.5) * margin {
        theta = (T::one() + theta) * T::lit(0.5);
        i = t.iter().map(|&x| x * theta).collect();
    }
    for j in 0..n {
        if !problem.vars.contains(&j) {
            i[j] = T::zero();
        }
    }

    let terms = T::from_count(n + 2 * problem.vars.len());
    let mut tau = T::one();
    let tau_max = T::lit(1e10).min(T::epsilon().recip() * T::lit(1e-5)).max(T::lit(1e4));
    loop {
        problem.center(&mut i, tau);
        if tau >= tau_max || terms / tau < T::epsilon() {
            break;
        }
        tau *= T::lit(10.0);
    }
    let h = model.h(&i)?;
    let lambda: Vec<T> = h.iter().map(|&x| (tau * -x).recip()).collect();

    let mut best = (i.clone(), lambda.clone(), convex_kkt_residual(&model, &i, &lambda)?);
    if let Some((pi, pl)) = problem.active_set(&i, &lambda, tau) {
        let res = convex_kkt_residual(&model, &pi, &pl)?;
        if res < best.2 {
            best = (pi, pl, res);
        }
    }
    let (mut i, lambda, _) = best;
    // Nudge toward `t` until the model constraint holds exactly.
    if linalg::max(&model.h(&i)?) > T::zero() {
        let base = i.clone();
        let mut s = T::epsilon();
        while s < T::one() {
            i = base.iter().zip(t).map(|(&x, &tj)| x + s * (tj - x)).collect();
            if linalg::max(&model.h(&i)?) <= T::zero() {
                break;
            }
            s *= T::lit(2.0);
        }
    }
    let kkt = convex_kkt_residual(&model, &i, &lambda)?;
    Ok(Optimum { cost: cost(&i), incentive: i, dual: lambda, kkt_residual: kkt, certified: kkt <= tol })
}
