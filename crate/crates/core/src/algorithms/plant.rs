use serde::{Deserialize, Serialize};

use super::AlgorithmError;
use crate::grid::{
    ac_power_flow, safety_h_from_voltage, NetworkCase, OperatingPoint, SafetyMode, SafetySpec, SensitivityModel,
};
use crate::linalg;
use crate::response::ResponseModel;
use crate::scalar::Scalar;

/// Which model turns a demand vector into measured voltages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoltageChannel {
    #[default]
    LinDistFlow,
    AcSweep,
}

/// One observation of the system at an incentive.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<T> {
    pub demand: Vec<T>,
    /// Squared voltage magnitudes (p.u.²).
    pub voltage: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> Measurement<T> {
    /// Smallest voltage magnitude (p.u.).
    pub fn min_voltage(&self) -> T {
        linalg::min(&self.voltage).max(T::zero()).sqrt()
    }

    pub fn max_h(&self) -> T {
        linalg::max(&self.h)
    }

    pub fn feasible(&self) -> bool {
        self.h.iter().all(|&x| x <= T::zero())
    }
}

/// The closed loop seen by an optimizer: users respond to incentives with `g`,
/// the feeder turns demand into voltages, and `h` scores them.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant<T> {
    pub sensitivity: SensitivityModel<T>,
    pub spec: SafetySpec<T>,
    pub response: ResponseModel<T>,
    /// Reactive demand, fixed regardless of incentive.
    pub q_demand: Vec<T>,
    pub channel: VoltageChannel,
    pub case: Option<NetworkCase<T>>,
}

impl<T: Scalar> Plant<T> {
    pub fn new(
        sensitivity: SensitivityModel<T>,
        spec: SafetySpec<T>,
        response: ResponseModel<T>,
        q_demand: Vec<T>,
    ) -> Result<Self, AlgorithmError> {
        let n = sensitivity.n();
        for got in [spec.len(), response.n(), q_demand.len()] {
            if got != n {
                return Err(AlgorithmError::DimensionMismatch { expected: n, got });
            }
        }
        Ok(Self { sensitivity, spec, response, q_demand, channel: VoltageChannel::LinDistFlow, case: None })
    }

    /// Measures voltages with the AC sweep on `case` instead of the linear model.
    pub fn with_ac_channel(mut self, case: NetworkCase<T>) -> Result<Self, AlgorithmError> {
        if case.pq_count() != self.n() {
            return Err(AlgorithmError::DimensionMismatch { expected: self.n(), got: case.pq_count() });
        }
        self.channel = VoltageChannel::AcSweep;
        self.case = Some(case);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.sensitivity.n()
    }

    /// Same plant measured through the LinDistFlow model.
    pub fn as_model(&self) -> Self {
        Self { channel: VoltageChannel::LinDistFlow, case: None, ..self.clone() }
    }

    /// Same plant with another response.
    pub fn with_response(&self, response: ResponseModel<T>) -> Result<Self, AlgorithmError> {
        if response.n() != self.n() {
            return Err(AlgorithmError::DimensionMismatch { expected: self.n(), got: response.n() });
        }
        Ok(Self { response, ..self.clone() })
    }

    pub fn demand(&self, i: &[T]) -> Result<Vec<T>, AlgorithmError> {
        Ok(self.response.demand(i)?)
    }

    /// Squared voltage magnitudes for a demand vector.
    pub fn voltage_for_demand(&self, demand: &[T]) -> Result<Vec<T>, AlgorithmError> {
        let p: Vec<T> = demand.iter().map(|&d| -d).collect();
        let q: Vec<T> = self.q_demand.iter().map(|&d| -d).collect();
        match self.channel {
            VoltageChannel::LinDistFlow => Ok(self.sensitivity.voltage_at(&p, &q)),
            VoltageChannel::AcSweep => {
                let case = self.case.as_ref().ok_or_else(|| AlgorithmError::InvalidConfig("AC channel without a case".into()))?;
                let v = ac_power_flow(case, &OperatingPoint { p, q })?;
                Ok(v.into_iter().map(|m| m * m).collect())
            }
        }
    }

    pub fn h_for_demand(&self, demand: &[T]) -> Result<Vec<T>, AlgorithmError> {
        Ok(safety_h_from_voltage(&self.spec, &self.voltage_for_demand(demand)?))
    }

    pub fn measure_demand(&self, demand: Vec<T>) -> Result<Measurement<T>, AlgorithmError> {
        let voltage = self.voltage_for_demand(&demand)?;
        let h = safety_h_from_voltage(&self.spec, &voltage);
        Ok(Measurement { demand, voltage, h })
    }

    pub fn measure(&self, i: &[T]) -> Result<Measurement<T>, AlgorithmError> {
        self.measure_demand(self.demand(i)?)
    }

    /// `h(g(i))`.
    pub fn h(&self, i: &[T]) -> Result<Vec<T>, AlgorithmError> {
        self.h_for_demand(&self.demand(i)?)
    }

    /// `Rᵀλ`, the voltage-weighted dual used by first-order updates.
    pub fn weighted_dual(&self, lambda: &[T]) -> Vec<T> {
        self.sensitivity.r.mul_vec_transposed(lambda)
    }

    pub(crate) fn require_lower_only(&self) -> Result<(), AlgorithmError> {
        match self.spec.mode {
            SafetyMode::LowerOnly => Ok(()),
            SafetyMode::TwoSided => Err(AlgorithmError::Precondition("gradient updates need lower-only safety".into())),
        }
    }
}
