//! Dense two-phase tableau simplex with Bland's rule.

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `min cᵀx  s.t.  A x ⪯ b,  lo ⪯ x ⪯ hi` (upper bounds may be infinite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub bounds: Vec<(T, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Multipliers of the rows of `A` (non-negative at optimality).
    pub duals: Vec<T>,
    /// Multipliers of the upper bounds.
    pub upper_duals: Vec<T>,
    /// Multipliers of the lower bounds.
    pub lower_duals: Vec<T>,
    pub kkt_residual: T,
    pub certified: bool,
    pub pivots: usize,
}

fn tol<T: Scalar>() -> T {
    T::epsilon().sqrt() * T::lit(0.1)
}

/// Largest KKT residual accepted as an optimality certificate.
pub fn certificate_tolerance<T: Scalar>() -> T {
    (T::epsilon() * T::lit(1e4)).max(T::lit(1e-8))
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(objective: Vec<T>, a: Matrix<T>, b: Vec<T>, bounds: Vec<(T, T)>) -> Result<Self, BaselineError> {
        let n = objective.len();
        if n == 0 || a.cols() != n || a.rows() != b.len() || bounds.len() != n {
            return Err(BaselineError::InvalidProblem("inconsistent LP dimensions".into()));
        }
        let finite = objective.iter().chain(&b).all(|v| v.is_finite())
            && (0..a.rows()).all(|r| a.row(r).iter().all(|v| v.is_finite()));
        if !finite {
            return Err(BaselineError::InvalidProblem("LP coefficients must be finite".into()));
        }
        if let Some(j) = bounds.iter().position(|&(lo, hi)| !lo.is_finite() || !(lo <= hi) || hi.is_nan()) {
            return Err(BaselineError::InvalidProblem(format!("variable {j} has invalid bounds")));
        }
        Ok(Self { objective, a, b, bounds })
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Rows of `A x ⪯ b` violated by more than `tol` at `x`.
    pub fn violated_rows(&self, x: &[T], tol: T) -> Vec<usize> {
        let ax = self.a.mul_vec(x);
        (0..self.m()).filter(|&r| ax[r] - self.b[r] > tol).collect()
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self) -> usize {
        self.width - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != T::zero() {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = self.obj[c];
        if f != T::zero() {
            for (v, &pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule: lowest-index improving column, lowest-index basic variable on ratio ties.
    fn optimize(&mut self, allowed: usize, limit: usize) -> Result<(), BaselineError> {
        let tol = tol::<T>();
        let rhs = self.rhs();
        loop {
            if self.pivots > limit {
                return Err(BaselineError::IterationLimit(limit));
            }
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < -tol) else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[enter] > tol {
                    let ratio = row[rhs] / row[enter];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - tol * (T::one() + lr.abs()) {
                                Some((i, ratio))
                            } else if ratio <= lr + tol * (T::one() + lr.abs()) && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return Err(BaselineError::Unbounded),
            }
        }
    }
}

/// Solves `problem`, certifying optimality through the KKT conditions.
pub fn solve_lp<T: Scalar>(problem: &LpProblem<T>) -> Result<LpSolution<T>, BaselineError> {
    let n = problem.n();
    let lo: Vec<T> = problem.bounds.iter().map(|b| b.0).collect();
    let shift = problem.a.mul_vec(&lo);

    // Shifted rows `a x′ ≤ b − a·lo`, then finite upper bounds `x′_j ≤ hi − lo`.
    let mut coef: Vec<Vec<T>> = Vec::new();
    let mut rhs: Vec<T> = Vec::new();
    for r in 0..problem.m() {
        coef.push(problem.a.row(r).to_vec());
        rhs.push(problem.b[r] - shift[r]);
    }
    let mut upper_rows = Vec::new();
    for (j, &(l, h)) in problem.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut row = vec![T::zero(); n];
            row[j] = T::one();
            upper_rows.push(j);
            coef.push(row);
            rhs.push(h - l);
        }
    }
    let rows = coef.len();
    let scale: Vec<T> = coef
        .iter()
        .map(|row| {
            let m = row.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
            if m > T::zero() { m } else { T::one() }
        })
        .collect();

    let flipped: Vec<bool> = rhs.iter().zip(&scale).map(|(&r, &s)| r / s < T::zero()).collect();
    let artificial_count = flipped.iter().filter(|&&f| f).count();
    let width = n + rows + artificial_count + 1;
    let mut tab = Tableau { rows: Vec::with_capacity(rows), obj: vec![T::zero(); width], basis: Vec::with_capacity(rows), width, pivots: 0 };
    let mut next_art = n + rows;
    for k in 0..rows {
        let sign = if flipped[k] { -T::one() } else { T::one() };
        let mut row = vec![T::zero(); width];
        for j in 0..n {
            row[j] = sign * coef[k][j] / scale[k];
        }
        row[n + k] = sign;
        row[width - 1] = sign * rhs[k] / scale[k];
        if flipped[k] {
            row[next_art] = T::one();
            tab.basis.push(next_art);
            next_art += 1;
        } else {
            tab.basis.push(n + k);
        }
        tab.rows.push(row);
    }
    let limit = 50 * (width + rows) + 1000;
    let tol = tol::<T>();

    if artificial_count > 0 {
        for j in n + rows..width - 1 {
            tab.obj[j] = T::one();
        }
        for k in 0..rows {
            if tab.basis[k] >= n + rows {
                let row = tab.rows[k].clone();
                for (o, v) in tab.obj.iter_mut().zip(&row) {
                    *o -= *v;
                }
            }
        }
        tab.optimize(width - 1, limit)?;
        let infeasibility = -tab.obj[width - 1];
        if infeasibility > tol * T::from_count(rows.max(1)) {
            let x = extract(&tab, n, &lo);
            let violated = problem.violated_rows(&x, tol);
            return Err(BaselineError::Infeasible { violated_rows: violated });
        }
        for k in 0..rows {
            if tab.basis[k] >= n + rows {
                if let Some(j) = (0..n + rows).find(|&j| tab.rows[k][j].abs() > tol) {
                    tab.pivot(k, j);
                }
            }
        }
    }

    tab.obj = vec![T::zero(); width];
    tab.obj[..n].copy_from_slice(&problem.objective);
    for k in 0..rows {
        let c = if tab.basis[k] < n { problem.objective[tab.basis[k]] } else { T::zero() };
        if c != T::zero() {
            let row = tab.rows[k].clone();
            for (o, v) in tab.obj.iter_mut().zip(&row) {
                *o -= c * *v;
            }
        }
    }
    tab.optimize(n + rows, limit)?;

    let x = extract(&tab, n, &lo);
    let mut duals = Vec::with_capacity(problem.m());
    for k in 0..problem.m() {
        duals.push(tab.obj[n + k] / scale[k]);
    }
    let mut upper_duals = vec![T::zero(); n];
    for (idx, &j) in upper_rows.iter().enumerate() {
        let k = problem.m() + idx;
        upper_duals[j] = tab.obj[n + k] / scale[k];
    }
    let objective = problem.objective.iter().zip(&x).fold(T::zero(), |acc, (&c, &v)| acc + c * v);
    let at = problem.a.mul_vec_transposed(&duals);
    let lower_duals: Vec<T> = (0..n).map(|j| problem.objective[j] + at[j] + upper_duals[j]).collect();
    let kkt_residual = kkt_residual(problem, &x, &duals, &upper_duals, &lower_duals);
    Ok(LpSolution {
        x,
        objective,
        duals,
        upper_duals,
        lower_duals,
        certified: kkt_residual < certificate_tolerance(),
        kkt_residual,
        pivots: tab.pivots,
    })
}

fn extract<T: Scalar>(tab: &Tableau<T>, n: usize, lo: &[T]) -> Vec<T> {
    let mut x = lo.to_vec();
    for (k, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rows[k][tab.rhs()];
        }
    }
    x
}

/// Worst violation among primal feasibility, dual feasibility, complementary
/// slackness and the duality gap (relative to the objective scale).
pub fn kkt_residual<T: Scalar>(problem: &LpProblem<T>, x: &[T], y: &[T], upper: &[T], lower: &[T]) -> T {
    let mut worst = T::zero();
    let ax = problem.a.mul_vec(x);
    for r in 0..problem.m() {
        let slack = problem.b[r] - ax[r];
        worst = worst.max(-slack).max(-y[r]).max((y[r] * slack).abs());
    }
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        worst = worst.max(lo - x[j]).max(-lower[j]).max((lower[j] * (x[j] - lo)).abs());
        if hi.is_finite() {
            worst = worst.max(x[j] - hi).max(-upper[j]).max((upper[j] * (hi - x[j])).abs());
        } else {
            worst = worst.max(upper[j].abs());
        }
    }
    let primal = problem.objective.iter().zip(x).fold(T::zero(), |acc, (&c, &v)| acc + c * v);
    let mut dual = T::zero();
    for r in 0..problem.m() {
        dual -= y[r] * problem.b[r];
    }
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        dual += lower[j] * lo;
        if hi.is_finite() {
            dual -= upper[j] * hi;
        }
    }
    worst.max((primal - dual).abs() / (T::one() + primal.abs()))
}
