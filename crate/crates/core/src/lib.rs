//! Feedback optimization of grid incentives under unknown end-user responses.
//!
//! The numerical core is generic over [`scalar::Scalar`]; the aliases below
//! fix it to `f64`.

pub mod algorithms;
pub mod baseline;
pub mod dynamics;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod response;
pub mod scalar;

pub use scalar::Scalar;

pub type Algorithm = algorithms::Algorithm<f64>;
pub type AlgorithmState = algorithms::AlgorithmState<f64>;
pub type Optimizer = algorithms::Optimizer<f64>;
pub type Plant = algorithms::Plant<f64>;
pub type Measurement = algorithms::Measurement<f64>;
pub type NetworkCase = grid::NetworkCase<f64>;
pub type SensitivityModel = grid::SensitivityModel<f64>;
pub type SafetySpec = grid::SafetySpec<f64>;
pub type OperatingPoint = grid::OperatingPoint<f64>;
pub type ResponseModel = response::ResponseModel<f64>;
pub type ResponseParams = response::ResponseParams<f64>;
pub type ResponseFamily = response::ResponseFamily<f64>;
pub type TimeVaryingScenario = dynamics::TimeVaryingScenario<f64>;
pub type Optimum = baseline::Optimum<f64>;
pub type Matrix = linalg::Matrix<f64>;
