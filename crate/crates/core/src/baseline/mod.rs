//! Reference optima and bounds computed with full knowledge of `g`.

mod convex;
mod simplex;

pub use convex::{convex_kkt_residual, convex_optimum};
pub use simplex::{certificate_tolerance, kkt_residual, solve_lp, LpProblem, LpSolution};

use serde::{Deserialize, Serialize};

use crate::algorithms::{cost, AlgorithmError, Plant};
use crate::linalg::{self, Matrix};
use crate::response::ResponseFamily;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible; violated rows {violated_rows:?}")]
    Infeasible { violated_rows: Vec<usize> },
    #[error("unbounded problem")]
    Unbounded,
    #[error("no convergence within {0} iterations")]
    IterationLimit(usize),
    #[error("unsupported response: {0}")]
    Unsupported(String),
    #[error("brute force refuses n = {0} (limit 3)")]
    TooLarge(usize),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

/// An optimal (or best-effort) incentive with its multipliers and certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Optimum<T> {
    pub incentive: Vec<T>,
    pub cost: T,
    pub dual: Vec<T>,
    pub kkt_residual: T,
    pub certified: bool,
}

fn lower_only<T: Scalar>(plant: &Plant<T>) -> Result<(), BaselineError> {
    match plant.spec.mode {
        crate::grid::SafetyMode::LowerOnly => Ok(()),
        crate::grid::SafetyMode::TwoSided => Err(BaselineError::Unsupported("baselines need lower-only safety".into())),
    }
}

/// Rows of the constraint violated when every threshold is paid (`g = u★`).
fn violated_at_threshold<T: Scalar>(plant: &Plant<T>) -> Result<Vec<usize>, BaselineError> {
    let h = plant.as_model().h(&plant.response.params.t)?;
    Ok(h.iter().enumerate().filter(|(_, &x)| x > T::zero()).map(|(k, _)| k).collect())
}

/// LP `min 1ᵀi  s.t.  −R diag(δ⊘t) i ⪯ −(v̲² + R(u★+δ) + X q − ṽ),  0 ⪯ i ⪯ t`
/// for a linear response under the LinDistFlow model.
pub fn incentive_lp<T: Scalar>(plant: &Plant<T>) -> Result<LpProblem<T>, BaselineError> {
    lower_only(plant)?;
    if plant.response.family != ResponseFamily::Linear {
        return Err(BaselineError::Unsupported(format!("LP needs a linear response, got {}", plant.response.family.name())));
    }
    let n = plant.n();
    let p = &plant.response.params;
    let r = &plant.sensitivity.r;
    let slope: Vec<T> = p.delta.iter().zip(&p.t).map(|(&d, &t)| d / t).collect();
    let a = Matrix::from_fn(n, n, |row, j| -r[(row, j)] * slope[j]);
    let h0 = plant.as_model().h(&vec![T::zero(); n])?;
    let b: Vec<T> = h0.iter().map(|&x| -x).collect();
    let bounds = p.t.iter().map(|&t| (T::zero(), t)).collect();
    LpProblem::new(vec![T::one(); n], a, b, bounds)
}

/// Exact optimum for a linear response.
pub fn lp_optimum<T: Scalar>(plant: &Plant<T>) -> Result<Optimum<T>, BaselineError> {
    let problem = incentive_lp(plant)?;
    let violated = violated_at_threshold(plant)?;
    if !violated.is_empty() {
        return Err(BaselineError::Infeasible { violated_rows: violated });
    }
    let s = solve_lp(&problem)?;
    Ok(Optimum { cost: cost(&s.x), incentive: s.x, dual: s.duals, kkt_residual: s.kkt_residual, certified: s.certified })
}

/// Cost of the LP on the linear interpolation of `g`.
pub fn lower_bound<T: Scalar>(plant: &Plant<T>) -> Result<T, BaselineError> {
    let linear = plant.with_response(plant.response.linear_approximation())?;
    Ok(lp_optimum(&linear)?.cost)
}

/// Exhaustive search over a uniform `grid_points`ⁿ grid on `[0, t]`.
/// Ties keep the first point found.
pub fn brute_force_oracle<T: Scalar>(plant: &Plant<T>, grid_points: usize) -> Result<(Vec<T>, T), BaselineError> {
    let n = plant.n();
    if n > 3 {
        return Err(BaselineError::TooLarge(n));
    }
    if grid_points < 2 {
        return Err(BaselineError::InvalidProblem("grid needs at least 2 points per axis".into()));
    }
    let t = &plant.response.params.t;
    let axis = |j: usize, k: usize| t[j] * T::from_count(k) / T::from_count(grid_points - 1);
    let total = grid_points.pow(n as u32);
    let mut best: Option<(Vec<T>, T)> = None;
    let mut i = vec![T::zero(); n];
    for flat in 0..total {
        let mut rest = flat;
        for (j, x) in i.iter_mut().enumerate() {
            *x = axis(j, rest % grid_points);
            rest /= grid_points;
        }
        let c = cost(&i);
        if best.as_ref().is_some_and(|(_, bc)| c >= *bc) {
            continue;
        }
        if linalg::max(&plant.h(&i)?) <= T::zero() {
            best = Some((i.clone(), c));
        }
    }
    best.ok_or_else(|| BaselineError::Infeasible { violated_rows: violated_at_threshold(plant).unwrap_or_default() })
}
