use serde::{Deserialize, Serialize};

use super::{check_len, GridError, SensitivityModel};
use crate::scalar::Scalar;

/// Net injections at the PQ buses (p.u., injection positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OperatingPoint<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Scalar> OperatingPoint<T> {
    pub fn zeros(n: usize) -> Self {
        Self { p: vec![T::zero(); n], q: vec![T::zero(); n] }
    }

    /// Pure loads: injection is the negated demand.
    pub fn from_demand(p_demand: &[T], q_demand: &[T]) -> Self {
        Self { p: p_demand.iter().map(|&x| -x).collect(), q: q_demand.iter().map(|&x| -x).collect() }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.q).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SafetyMode {
    TwoSided,
    #[default]
    LowerOnly,
}

/// Voltage magnitude bounds (p.u.) per PQ bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SafetySpec<T> {
    pub v_lower: Vec<T>,
    pub v_upper: Vec<T>,
    pub mode: SafetyMode,
}

impl<T: Scalar> SafetySpec<T> {
    pub fn new(v_lower: Vec<T>, v_upper: Vec<T>, mode: SafetyMode) -> Result<Self, GridError> {
        check_len(v_lower.len(), v_upper.len())?;
        if let Some(k) = v_lower.iter().zip(&v_upper).position(|(lo, hi)| !(lo < hi)) {
            return Err(GridError::InvalidBounds(k));
        }
        Ok(Self { v_lower, v_upper, mode })
    }

    pub fn uniform(n: usize, lower: T, upper: T, mode: SafetyMode) -> Result<Self, GridError> {
        Self::new(vec![lower; n], vec![upper; n], mode)
    }

    pub fn len(&self) -> usize {
        self.v_lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_lower.is_empty()
    }

    /// Squared lower bound, comparable with the model's voltage variable.
    pub(crate) fn lower_sq(&self, k: usize) -> T {
        self.v_lower[k] * self.v_lower[k]
    }

    pub(crate) fn upper_sq(&self, k: usize) -> T {
        self.v_upper[k] * self.v_upper[k]
    }
}

/// LinDistFlow squared-magnitude voltages `R p + X q + ṽ`.
pub fn lindistflow_voltage<T: Scalar>(model: &SensitivityModel<T>, op: &OperatingPoint<T>) -> Result<Vec<T>, GridError> {
    check_len(model.n(), op.p.len())?;
    check_len(model.n(), op.q.len())?;
    Ok(model.voltage_unchecked(&op.p, &op.q))
}

/// Safety map applied to squared-magnitude voltages `v`.
pub fn safety_h_from_voltage<T: Scalar>(spec: &SafetySpec<T>, v: &[T]) -> Vec<T> {
    v.iter()
        .enumerate()
        .map(|(k, &vk)| {
            let below = spec.lower_sq(k) - vk;
            match spec.mode {
                SafetyMode::LowerOnly => below,
                SafetyMode::TwoSided => below.max(vk - spec.upper_sq(k)),
            }
        })
        .collect()
}

/// `h(u)`; non-positive entries mean the bus voltage is within bounds.
pub fn safety_h<T: Scalar>(
    model: &SensitivityModel<T>,
    spec: &SafetySpec<T>,
    op: &OperatingPoint<T>,
) -> Result<Vec<T>, GridError> {
    check_len(model.n(), spec.len())?;
    let v = lindistflow_voltage(model, op)?;
    Ok(safety_h_from_voltage(spec, &v))
}
