use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::algorithms::Plant;
use crate::dynamics::LoadTable;
use crate::grid::{ac_power_flow, compute_sensitivity, NetworkCase, OperatingPoint, SafetyMode, SafetySpec, SensitivityModel};
use crate::response::{ResponseFamily, ResponseModel, ResponseParams};
use crate::scalar::Scalar;

/// Demand inflation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InflationConfig {
    pub min_factor: f64,
    pub max_factor: f64,
    /// Stop once strictly more than this many buses violate the lower bound.
    pub violations: usize,
    pub max_rounds: usize,
    pub inflate_reactive: bool,
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self { min_factor: 1.0, max_factor: 1.1, violations: 5, max_rounds: 1000, inflate_reactive: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Inflation<T> {
    pub delta: Vec<T>,
    /// Reactive demand after inflation (unchanged unless reactive inflation is on).
    pub q_demand: Vec<T>,
    pub rounds: usize,
    pub violations: usize,
}

/// Number of buses below the lower bound under LinDistFlow.
pub fn count_lower_violations<T: Scalar>(sens: &SensitivityModel<T>, spec: &SafetySpec<T>, p_demand: &[T], q_demand: &[T]) -> usize {
    let p: Vec<T> = p_demand.iter().map(|&x| -x).collect();
    let q: Vec<T> = q_demand.iter().map(|&x| -x).collect();
    let v = sens.voltage_at(&p, &q);
    v.iter().zip(&spec.v_lower).filter(|(&v, &lo)| v < lo * lo).count()
}

/// Multiplies every load by an independent `U[min, max]` factor per round until
/// more than `cfg.violations` buses drop below the lower bound.
pub fn inflate_demand<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    sens: &SensitivityModel<T>,
    spec: &SafetySpec<T>,
    base_p: &[T],
    base_q: &[T],
    cfg: &InflationConfig,
) -> Result<Inflation<T>, HarnessError> {
    if !(cfg.min_factor >= 1.0 && cfg.min_factor <= cfg.max_factor) {
        return Err(HarnessError::Config("inflation factors must satisfy 1 <= min <= max".into()));
    }
    let factor = Uniform::new_inclusive(cfg.min_factor, cfg.max_factor).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut p = base_p.to_vec();
    let mut q = base_q.to_vec();
    let mut rounds = 0;
    let mut violations = count_lower_violations(sens, spec, &p, &q);
    while violations <= cfg.violations {
        if rounds == cfg.max_rounds {
            return Err(HarnessError::Scenario(format!(
                "only {violations} violations after {rounds} inflation rounds"
            )));
        }
        for j in 0..p.len() {
            p[j] *= T::lit(factor.sample(rng));
            if cfg.inflate_reactive {
                q[j] *= T::lit(factor.sample(rng));
            }
        }
        rounds += 1;
        violations = count_lower_violations(sens, spec, &p, &q);
    }
    let delta = p.iter().zip(base_p).map(|(&a, &b)| (a - b).max(T::zero())).collect();
    Ok(Inflation { delta, q_demand: q, rounds, violations })
}

/// Thresholds uniform on `(0, 1]`.
pub fn sample_thresholds<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| loop {
            let x: f64 = rng.random_range(0.0..=1.0);
            if x > 0.0 {
                break T::lit(x);
            }
        })
        .collect()
}

/// Log-uniform per-bus scaling of the case's nominal loads, shrunk uniformly
/// until the AC solution clears the lower bound by `margin`.
pub fn synthetic_base_loads<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    case: &NetworkCase<T>,
    band: (f64, f64),
    v_lower: f64,
    margin: f64,
) -> Result<(Vec<T>, Vec<T>), HarnessError> {
    if !(band.0 > 0.0 && band.0 <= band.1) {
        return Err(HarnessError::Config("load band must satisfy 0 < low <= high".into()));
    }
    let (p0, q0) = case.nominal_demand();
    let (lo, hi) = (band.0.ln(), band.1.ln());
    let factors: Vec<f64> = (0..p0.len()).map(|_| if hi > lo { rng.random_range(lo..hi).exp() } else { band.0 }).collect();
    let mut scale = 1.0;
    for _ in 0..200 {
        let p: Vec<T> = p0.iter().zip(&factors).map(|(&x, &f)| x * T::lit(f * scale)).collect();
        let q: Vec<T> = q0.iter().zip(&factors).map(|(&x, &f)| x * T::lit(f * scale)).collect();
        let v = ac_power_flow(case, &OperatingPoint::from_demand(&p, &q))?;
        if v.iter().all(|m| m.as_f64() >= v_lower + margin) {
            return Ok((p, q));
        }
        scale *= 0.95;
    }
    Err(HarnessError::Scenario("base loads could not be made voltage-feasible".into()))
}

/// Reactive-to-active ratio of each PQ bus's nominal load (zero where the
/// nominal active load is zero).
pub fn nominal_q_ratio<T: Scalar>(case: &NetworkCase<T>) -> Vec<T> {
    let (p, q) = case.nominal_demand();
    p.iter().zip(&q).map(|(&p, &q)| if p > T::zero() { q / p } else { T::zero() }).collect()
}

/// Minute-level table around `base`: a mean-reverting log random walk with
/// per-minute volatility `volatility`.
pub fn synthetic_load_table<T: Scalar, R: Rng + ?Sized>(rng: &mut R, base: &[T], minutes: usize, volatility: f64) -> Result<LoadTable, HarnessError> {
    let noise = Normal::new(0.0, volatility).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut state = vec![0.0f64; base.len()];
    let mut rows = Vec::with_capacity(minutes);
    for _ in 0..minutes {
        for x in state.iter_mut() {
            *x = 0.9 * *x + noise.sample(rng);
        }
        rows.push(base.iter().zip(&state).map(|(&b, &x)| b.as_f64() * x.exp()).collect());
    }
    LoadTable::new(rows).map_err(|e| HarnessError::Scenario(e.to_string()))
}

/// A linearized, inflated feeder with sampled thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScenarioInstance<T> {
    pub case: NetworkCase<T>,
    pub sensitivity: SensitivityModel<T>,
    pub spec: SafetySpec<T>,
    pub u_star: Vec<T>,
    pub q_demand: Vec<T>,
    pub delta: Vec<T>,
    pub t: Vec<T>,
    pub inflation_rounds: usize,
}

impl<T: Scalar> ScenarioInstance<T> {
    /// Base loads, linearization, inflation and thresholds drawn in that order from `rng`.
    #[allow(clippy::too_many_arguments)]
    pub fn build<R: Rng + ?Sized>(
        rng: &mut R,
        case: NetworkCase<T>,
        base: (Vec<T>, Vec<T>),
        v_lower: T,
        v_upper: T,
        mode: SafetyMode,
        inflation: &InflationConfig,
    ) -> Result<Self, HarnessError> {
        let (u_star, base_q) = base;
        let n = case.pq_count();
        let sensitivity = compute_sensitivity(&case, &OperatingPoint::from_demand(&u_star, &base_q))?;
        let spec = SafetySpec::uniform(n, v_lower, v_upper, mode)?;
        let infl = inflate_demand(rng, &sensitivity, &spec, &u_star, &base_q, inflation)?;
        let t = sample_thresholds(rng, n);
        Ok(Self { case, sensitivity, spec, u_star, q_demand: infl.q_demand, delta: infl.delta, t, inflation_rounds: infl.rounds })
    }

    /// Demand at zero incentive.
    pub fn peak(&self) -> Vec<T> {
        self.u_star.iter().zip(&self.delta).map(|(&u, &d)| u + d).collect()
    }

    pub fn params(&self) -> ResponseParams<T> {
        ResponseParams { u_star: self.u_star.clone(), delta: self.delta.clone(), t: self.t.clone() }
    }

    pub fn plant(&self, response: ResponseModel<T>) -> Result<Plant<T>, HarnessError> {
        Ok(Plant::new(self.sensitivity.clone(), self.spec.clone(), response, self.q_demand.clone())?)
    }

    pub fn plant_for(&self, family: ResponseFamily<T>) -> Result<Plant<T>, HarnessError> {
        let response = ResponseModel::new(self.params(), family).map_err(crate::algorithms::AlgorithmError::from)?;
        self.plant(response)
    }
}
