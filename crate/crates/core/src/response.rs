//! Incentive-response families `g(i)`.
//!
//! Responses are expressed as active *demand* per bus (consumption positive):
//! `g(0) = u★ + δ`, `g(t) = u★`, and `g` is non-increasing in every coordinate.
//! [`ResponseModel::evaluate`] converts to injections (`p = −g`) for the grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::OperatingPoint;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResponseError {
    #[error("incentive at bus {0} is negative")]
    NegativeIncentive(usize),
    #[error("step responses are not differentiable")]
    NotDifferentiable,
    #[error("threshold estimate at bus {0} must be positive")]
    NonPositiveEstimate(usize),
    #[error("invalid response parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn check_len(expected: usize, got: usize) -> Result<(), ResponseError> {
    if expected == got {
        Ok(())
    } else {
        Err(ResponseError::DimensionMismatch { expected, got })
    }
}

/// Setpoint, demand excess and incentive thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResponseParams<T> {
    pub u_star: Vec<T>,
    pub delta: Vec<T>,
    pub t: Vec<T>,
}

impl<T: Scalar> ResponseParams<T> {
    pub fn new(u_star: Vec<T>, delta: Vec<T>, t: Vec<T>) -> Result<Self, ResponseError> {
        check_len(u_star.len(), delta.len())?;
        check_len(u_star.len(), t.len())?;
        if let Some(k) = delta.iter().position(|d| !(*d >= T::zero() && d.is_finite())) {
            return Err(ResponseError::InvalidParams(format!("delta[{k}] must be finite and non-negative")));
        }
        if let Some(k) = t.iter().position(|x| !(*x > T::zero() && x.is_finite())) {
            return Err(ResponseError::InvalidParams(format!("t[{k}] must be finite and positive")));
        }
        if u_star.iter().any(|u| !u.is_finite()) {
            return Err(ResponseError::InvalidParams("u_star must be finite".into()));
        }
        Ok(Self { u_star, delta, t })
    }

    pub fn n(&self) -> usize {
        self.u_star.len()
    }

    /// Demand at zero incentive, `u★ + δ`.
    pub fn peak(&self) -> Vec<T> {
        self.u_star.iter().zip(&self.delta).map(|(&u, &d)| u + d).collect()
    }
}

/// One bus of a step response: right-continuous staircase falling from
/// `u★ + δ` to `u★`. `breakpoints[k] = (incentive, demand level from there on)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StepCurve<T> {
    pub breakpoints: Vec<(T, T)>,
}

impl<T: Scalar> StepCurve<T> {
    /// Number of downward jumps (controllable devices).
    pub fn devices(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn level(&self, peak: T, incentive: T) -> T {
        // Right-continuous: paying exactly the breakpoint price sheds the device.
        let passed = self.breakpoints.partition_point(|&(x, _)| x <= incentive);
        if passed == 0 {
            peak
        } else {
            self.breakpoints[passed - 1].1
        }
    }

    /// Devices as `(incentive width, demand height)` from the left.
    pub fn devices_from_left(&self, peak: T) -> Vec<(T, T)> {
        let mut prev = (T::zero(), peak);
        self.breakpoints
            .iter()
            .map(|&(x, l)| {
                let dev = (x - prev.0, prev.1 - l);
                prev = (x, l);
                dev
            })
            .collect()
    }

    /// Rebuilds a curve from devices ordered from the left.
    pub fn from_devices(peak: T, devices: &[(T, T)]) -> Self {
        let mut x = T::zero();
        let mut level = peak;
        let breakpoints = devices
            .iter()
            .map(|&(w, h)| {
                x += w;
                level -= h;
                (x, level)
            })
            .collect();
        Self { breakpoints }
    }

    fn validate(&self, u_star: T, peak: T, t: T) -> Result<(), String> {
        let (first, last) = match (self.breakpoints.first(), self.breakpoints.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err("step curve has no breakpoints".into()),
        };
        if !(first.0 > T::zero()) || !(first.1 < peak) {
            return Err("first step must start after zero incentive and drop below the peak".into());
        }
        if self.breakpoints.windows(2).any(|w| !(w[0].0 < w[1].0) || !(w[0].1 > w[1].1)) {
            return Err("breakpoints must increase in incentive and decrease in demand".into());
        }
        let tol = T::lit(1e-9) * (T::one() + t.abs() + u_star.abs() + peak.abs());
        if (last.0 - t).abs() > tol || (last.1 - u_star).abs() > tol {
            return Err("last breakpoint must be (t, u★)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "snake_case")]
pub enum ResponseFamily<T> {
    Linear,
    QuadraticConvex,
    PolynomialConvex { degree: u32 },
    PolynomialConcave { degree: u32 },
    Step { curves: Vec<StepCurve<T>> },
}

impl<T> ResponseFamily<T> {
    pub fn name(&self) -> String {
        match self {
            Self::Linear => "linear".into(),
            Self::QuadraticConvex => "quad_convex".into(),
            Self::PolynomialConvex { degree } => format!("poly_convex_y{degree}"),
            Self::PolynomialConcave { degree } => format!("poly_concave_y{degree}"),
            Self::Step { curves } => format!("step_d{}", curves.first().map_or(0, |c| c.breakpoints.len())),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Self::Step { .. })
    }

    /// Smooth and convex, so the incentive problem is a convex program.
    pub fn is_convex(&self) -> bool {
        matches!(self, Self::Linear | Self::QuadraticConvex | Self::PolynomialConvex { .. })
    }
}

/// A concrete response `g_{u★}(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResponseModel<T> {
    pub params: ResponseParams<T>,
    pub family: ResponseFamily<T>,
}

impl<T: Scalar> ResponseModel<T> {
    pub fn new(params: ResponseParams<T>, family: ResponseFamily<T>) -> Result<Self, ResponseError> {
        match &family {
            ResponseFamily::PolynomialConvex { degree } | ResponseFamily::PolynomialConcave { degree } => {
                if *degree < 2 || degree % 2 != 0 {
                    return Err(ResponseError::InvalidParams(format!("degree {degree} must be an even integer >= 2")));
                }
            }
            ResponseFamily::Step { curves } => {
                check_len(params.n(), curves.len())?;
                for (j, c) in curves.iter().enumerate() {
                    let peak = params.u_star[j] + params.delta[j];
                    if params.delta[j] <= T::zero() {
                        return Err(ResponseError::InvalidParams(format!("bus {j}: step responses need delta > 0")));
                    }
                    c.validate(params.u_star[j], peak, params.t[j])
                        .map_err(|e| ResponseError::InvalidParams(format!("bus {j}: {e}")))?;
                }
            }
            _ => {}
        }
        Ok(Self { params, family })
    }

    pub fn linear(params: ResponseParams<T>) -> Self {
        Self { params, family: ResponseFamily::Linear }
    }

    pub fn quadratic(params: ResponseParams<T>) -> Self {
        Self { params, family: ResponseFamily::QuadraticConvex }
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// Curvature coefficient `b = δ ⊘ t°ʸ` for the polynomial families (`y = 2` for quadratic).
    pub fn coefficient(&self, j: usize) -> T {
        let y = match self.family {
            ResponseFamily::QuadraticConvex => 2,
            ResponseFamily::PolynomialConvex { degree } | ResponseFamily::PolynomialConcave { degree } => degree,
            _ => 1,
        };
        self.params.delta[j] / self.params.t[j].powi(y as i32)
    }

    /// Demand at bus `j` for a non-negative incentive, clamped to `[0, t_j]`.
    pub fn demand_at(&self, j: usize, incentive: T) -> T {
        let p = &self.params;
        let (u, d, t) = (p.u_star[j], p.delta[j], p.t[j]);
        if incentive >= t {
            return u;
        }
        let i = incentive;
        match &self.family {
            ResponseFamily::Linear => u + d * ((t - i) / t),
            ResponseFamily::QuadraticConvex => u + self.coefficient(j) * (t - i) * (t - i),
            ResponseFamily::PolynomialConvex { degree } => u + self.coefficient(j) * (t - i).powi(*degree as i32),
            ResponseFamily::PolynomialConcave { degree } => u + d - self.coefficient(j) * i.powi(*degree as i32),
            ResponseFamily::Step { curves } => curves[j].level(u + d, i),
        }
    }

    /// Demand vector `g(i)`.
    pub fn demand(&self, i: &[T]) -> Result<Vec<T>, ResponseError> {
        check_len(self.n(), i.len())?;
        if let Some(k) = i.iter().position(|x| !(*x >= T::zero())) {
            return Err(ResponseError::NegativeIncentive(k));
        }
        Ok(self.demand_unchecked(i))
    }

    pub(crate) fn demand_unchecked(&self, i: &[T]) -> Vec<T> {
        i.iter().enumerate().map(|(j, &x)| self.demand_at(j, x.max(T::zero()))).collect()
    }

    /// Operating point reached under incentive `i`; reactive injections are fixed.
    pub fn evaluate(&self, i: &[T], q: &[T]) -> Result<OperatingPoint<T>, ResponseError> {
        check_len(self.n(), q.len())?;
        let d = self.demand(i)?;
        Ok(OperatingPoint { p: d.into_iter().map(|x| -x).collect(), q: q.to_vec() })
    }

    /// Derivative of `g_j` with respect to `i_j` (diagonal of the Jacobian).
    pub fn derivative_at(&self, j: usize, incentive: T) -> Result<T, ResponseError> {
        let p = &self.params;
        let (d, t) = (p.delta[j], p.t[j]);
        if incentive > t {
            return match self.family {
                ResponseFamily::Step { .. } => Err(ResponseError::NotDifferentiable),
                _ => Ok(T::zero()),
            };
        }
        let i = incentive.max(T::zero());
        Ok(match &self.family {
            ResponseFamily::Linear => -d / t,
            ResponseFamily::QuadraticConvex => T::lit(2.0) * self.coefficient(j) * (i - t),
            ResponseFamily::PolynomialConvex { degree } => {
                let y = *degree as i32;
                -T::from_count(*degree as usize) * self.coefficient(j) * (t - i).powi(y - 1)
            }
            ResponseFamily::PolynomialConcave { degree } => {
                let y = *degree as i32;
                -T::from_count(*degree as usize) * self.coefficient(j) * i.powi(y - 1)
            }
            ResponseFamily::Step { .. } => return Err(ResponseError::NotDifferentiable),
        })
    }

    /// Second derivative of `g_j`; zero beyond the threshold.
    pub fn curvature_at(&self, j: usize, incentive: T) -> Result<T, ResponseError> {
        let t = self.params.t[j];
        if incentive > t {
            return if self.family.is_smooth() { Ok(T::zero()) } else { Err(ResponseError::NotDifferentiable) };
        }
        let i = incentive.max(T::zero());
        Ok(match &self.family {
            ResponseFamily::Linear => T::zero(),
            ResponseFamily::QuadraticConvex => T::lit(2.0) * self.coefficient(j),
            ResponseFamily::PolynomialConvex { degree } => {
                let y = *degree as usize;
                T::from_count(y * (y - 1)) * self.coefficient(j) * (t - i).powi(y as i32 - 2)
            }
            ResponseFamily::PolynomialConcave { degree } => {
                let y = *degree as usize;
                -T::from_count(y * (y - 1)) * self.coefficient(j) * i.powi(y as i32 - 2)
            }
            ResponseFamily::Step { .. } => return Err(ResponseError::NotDifferentiable),
        })
    }

    /// Diagonal of `∇_i g`. Off-diagonal entries vanish by separability.
    pub fn gradient(&self, i: &[T]) -> Result<Vec<T>, ResponseError> {
        check_len(self.n(), i.len())?;
        i.iter().enumerate().map(|(j, &x)| self.derivative_at(j, x)).collect()
    }

    /// Linear interpolation between `(0, u★ + δ)` and `(t, u★)`.
    pub fn linear_approximation(&self) -> Self {
        Self::linear(self.params.clone())
    }
}

/// Gradient diagonal `−δ ⊘ t′` of the linear response built on a threshold estimate.
pub fn coarse_gradient<T: Scalar>(params: &ResponseParams<T>, t_est: &[T]) -> Result<Vec<T>, ResponseError> {
    check_len(params.n(), t_est.len())?;
    params
        .delta
        .iter()
        .zip(t_est)
        .enumerate()
        .map(|(j, (&d, &te))| if te > T::zero() && te.is_finite() { Ok(-d / te) } else { Err(ResponseError::NonPositiveEstimate(j)) })
        .collect()
}

/// Random staircase with `devices` jumps per bus: start from the single step
/// at `t`, then repeatedly split a random segment at a uniform incentive with a
/// uniform demand level between its neighbours.
pub fn generate_step_model<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    params: ResponseParams<T>,
    devices: usize,
) -> Result<ResponseModel<T>, ResponseError> {
    if devices < 2 {
        return Err(ResponseError::InvalidParams(format!("step responses need at least 2 devices, got {devices}")));
    }
    let mut curves = Vec::with_capacity(params.n());
    for j in 0..params.n() {
        let (u, d, t) = (params.u_star[j].as_f64(), params.delta[j].as_f64(), params.t[j].as_f64());
        let mut bps: Vec<(f64, f64)> = vec![(t, u)];
        while bps.len() < devices {
            let x: f64 = rng.random_range(0.0..t);
            let pos = bps.partition_point(|&(b, _)| b <= x);
            // Degenerate draws (x = 0 or coinciding with an existing breakpoint) are redrawn.
            if x <= 0.0 || (pos > 0 && bps[pos - 1].0 == x) {
                continue;
            }
            let above = if pos == 0 { u + d } else { bps[pos - 1].1 };
            let below = bps[pos].1;
            let level: f64 = rng.random_range(below..=above);
            if !(level > below && level < above) {
                continue;
            }
            bps.insert(pos, (x, level));
        }
        let mut curve = StepCurve { breakpoints: bps.into_iter().map(|(x, l)| (T::lit(x), T::lit(l))).collect() };
        // Pin the terminal jump to the exact parameter values.
        if let Some(last) = curve.breakpoints.last_mut() {
            *last = (params.t[j], params.u_star[j]);
        }
        curves.push(curve);
    }
    ResponseModel::new(params, ResponseFamily::Step { curves })
}
