use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cost, project, AlgorithmError, AlgorithmState, Measurement, Plant, StepSchedule};
use crate::linalg;
use crate::scalar::Scalar;

/// Exploration direction generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ZetaSampler {
    /// I.i.d. uniform on `[−1, 1]` per coordinate.
    #[default]
    Uniform,
    /// `ζ_j(k) = √2 sin(2π (j+1) k / P)`; needs `P ≥ 2n + 1`.
    Sinusoidal { period: usize },
}

impl ZetaSampler {
    /// Diagonal of the expected `ζζᵀ`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Uniform => 1.0 / 3.0,
            Self::Sinusoidal { .. } => 1.0,
        }
    }

    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, k: usize, n: usize, rng: &mut R) -> Vec<T> {
        match self {
            Self::Uniform => (0..n).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect(),
            Self::Sinusoidal { period } => {
                let phase = (k % period) as f64 / *period as f64;
                (0..n)
                    .map(|j| T::lit(std::f64::consts::SQRT_2 * (std::f64::consts::TAU * (j + 1) as f64 * phase).sin()))
                    .collect()
            }
        }
    }
}

/// Zeroth-order settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ZoConfig<T> {
    pub sigma: T,
    /// Primal regularization weight `p`.
    pub p: T,
    /// Dual retention factor `1 − ε d` applied each step.
    pub decay: T,
    pub zeta: ZetaSampler,
    /// Half-width `e_y` of uniform noise added to every measured demand.
    pub noise: T,
}

impl<T: Scalar> ZoConfig<T> {
    pub fn with_sigma(sigma: T) -> Self {
        Self { sigma, p: T::zero(), decay: T::lit(0.95), zeta: ZetaSampler::Uniform, noise: T::zero() }
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let bad = |m: &str| Err(AlgorithmError::InvalidConfig(m.into()));
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.p >= T::zero()) || !(self.noise >= T::zero()) {
            return bad("p and noise must be non-negative");
        }
        if !(self.decay > T::zero() && self.decay <= T::one()) {
            return bad("dual decay factor must lie in (0, 1]");
        }
        if let ZetaSampler::Sinusoidal { period } = self.zeta {
            if period < 3 {
                return bad("sinusoidal period too short");
            }
        }
        Ok(())
    }
}

fn noisy_demand<T: Scalar, R: Rng + ?Sized>(plant: &Plant<T>, i: &[T], noise: T, rng: &mut R) -> Result<Vec<T>, AlgorithmError> {
    let mut g = plant.demand(i)?;
    if noise > T::zero() {
        let e = noise.as_f64();
        for x in g.iter_mut() {
            *x += T::lit(rng.random_range(-e..=e));
        }
    }
    Ok(g)
}

pub fn zoio_step<T: Scalar, R: Rng + ?Sized>(
    state: &mut AlgorithmState<T>,
    plant: &Plant<T>,
    cfg: &ZoConfig<T>,
    primal_step: T,
    dual: &StepSchedule<T>,
    rng: &mut R,
) -> Result<Measurement<T>, AlgorithmError> {
    let n = state.n();
    if let ZetaSampler::Sinusoidal { period } = cfg.zeta {
        if period < 2 * n + 1 {
            return Err(AlgorithmError::InvalidConfig(format!("sinusoidal period {period} must be at least {}", 2 * n + 1)));
        }
    }
    let zeta: Vec<T> = cfg.zeta.sample(state.iteration, n, rng);
    let mut lagrangian_at = |sign: T| -> Result<T, AlgorithmError> {
        let ip: Vec<T> = state.incentive.iter().zip(&zeta).map(|(&i, &z)| (i + sign * cfg.sigma * z).max(T::zero())).collect();
        let g = noisy_demand(plant, &ip, cfg.noise, rng)?;
        let h = plant.h_for_demand(&g)?;
        Ok(cost(&ip) + linalg::dot(&state.dual, &h) + T::lit(0.5) * cfg.p * linalg::dot(&ip, &ip))
    };
    let plus = lagrangian_at(T::one())?;
    let minus = lagrangian_at(-T::one())?;
    let scale = (plus - minus) / (T::lit(2.0) * cfg.sigma);
    let shrink = T::one() - primal_step * cfg.p;
    for ((i, z), g) in state.incentive.iter_mut().zip(&zeta).zip(state.last_gradient.iter_mut()) {
        *g = *z * scale;
        *i = shrink * *i - primal_step * *g;
    }
    project(&mut state.incentive);
    let clean = plant.measure(&state.incentive)?;
    let h = if cfg.noise > T::zero() {
        plant.h_for_demand(&noisy_demand(plant, &state.incentive, cfg.noise, rng)?)?
    } else {
        clean.h.clone()
    };
    let eps_d = match dual {
        StepSchedule::Constant { step } => *step,
        _ => state.dual_step,
    };
    for (l, h) in state.dual.iter_mut().zip(&h) {
        *l = cfg.decay * *l + eps_d * *h;
    }
    project(&mut state.dual);
    state.record_dual_outcome(dual, h);
    Ok(clean)
}

/// Frobenius distance between the sample mean of `ζζᵀ` and `c·I`.
pub fn zeta_estimator_bias_check<R: Rng + ?Sized>(sampler: ZetaSampler, n: usize, samples: usize, rng: &mut R) -> f64 {
    let mut acc = vec![0.0; n * n];
    for k in 0..samples.max(1) {
        let z: Vec<f64> = sampler.sample(k, n, rng);
        for a in 0..n {
            for b in 0..n {
                acc[a * n + b] += z[a] * z[b];
            }
        }
    }
    let m = samples.max(1) as f64;
    let c = sampler.second_moment();
    let mut sq = 0.0;
    for a in 0..n {
        for b in 0..n {
            let target = if a == b { c } else { 0.0 };
            sq += (acc[a * n + b] / m - target).powi(2);
        }
    }
    sq.sqrt()
}
