//! Electrical model of a radial distribution feeder: admittance matrices,
//! LinDistFlow sensitivities, the backward-forward sweep used as the
//! nonlinear measurement channel, and the voltage safety map.
//!
//! Voltages in the linear model are squared magnitudes (p.u.²); that is the
//! quantity LinDistFlow is exact to first order in. Safety bounds are given as
//! magnitudes and squared where they meet the model.

mod admittance;
mod case;
mod power_flow;
mod safety;
mod sensitivity;

pub use admittance::{build_reduced_admittance, ReducedAdmittance};
pub use case::{Bus, Line, NetworkCase, IEEE33_JSON};
pub use power_flow::{ac_power_flow, ac_power_flow_phasors, SweepOptions};
pub use safety::{
    lindistflow_voltage, safety_h, safety_h_from_voltage, OperatingPoint, SafetyMode, SafetySpec,
};
pub use sensitivity::{compute_sensitivity, SensitivityModel};

use crate::linalg::SingularMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("network is disconnected: bus {0} unreachable from the slack")]
    Disconnected(usize),
    #[error("line {0} has zero impedance")]
    ZeroImpedance(usize),
    #[error("line {0} has negative or non-finite impedance")]
    InvalidImpedance(usize),
    #[error("bus ids must be 0..{count} without gaps; found {found}")]
    InvalidBus { count: usize, found: usize },
    #[error("slack bus {0} does not exist")]
    InvalidSlack(usize),
    #[error("line {0} connects a bus to itself")]
    SelfLoop(usize),
    #[error("reduced admittance matrix is singular: {0}")]
    Singular(#[from] SingularMatrix),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("backward-forward sweep did not converge in {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("network is not radial ({lines} lines for {buses} buses); meshed networks are unsupported")]
    NotRadial { lines: usize, buses: usize },
    #[error("invalid safety bounds at bus {0}: lower must be below upper")]
    InvalidBounds(usize),
    #[error("case file: {0}")]
    Parse(String),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<(), GridError> {
    if expected == got {
        Ok(())
    } else {
        Err(GridError::DimensionMismatch { expected, got })
    }
}
