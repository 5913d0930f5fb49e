use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{ac_power_flow, build_reduced_admittance, check_len, GridError, NetworkCase, OperatingPoint};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// LinDistFlow model `v = R p + X q + ṽ` of squared voltage magnitudes,
/// together with the point it was linearized at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SensitivityModel<T> {
    pub r: Matrix<T>,
    pub x: Matrix<T>,
    pub v_tilde: Vec<T>,
    pub p_star: Vec<T>,
    pub q_star: Vec<T>,
    pub v_star: Vec<T>,
}

impl<T: Scalar> SensitivityModel<T> {
    /// Assembles a model from explicit matrices; `v★` is implied by the offset.
    pub fn from_parts(r: Matrix<T>, x: Matrix<T>, v_tilde: Vec<T>, p_star: Vec<T>, q_star: Vec<T>) -> Result<Self, GridError> {
        let n = v_tilde.len();
        for (rows, cols) in [(r.rows(), r.cols()), (x.rows(), x.cols())] {
            check_len(n, rows)?;
            check_len(n, cols)?;
        }
        check_len(n, p_star.len())?;
        check_len(n, q_star.len())?;
        let mut model = Self { r, x, v_tilde, p_star, q_star, v_star: Vec::new() };
        model.v_star = model.voltage_unchecked(&model.p_star, &model.q_star);
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.v_tilde.len()
    }

    pub(crate) fn voltage_unchecked(&self, p: &[T], q: &[T]) -> Vec<T> {
        let rp = self.r.mul_vec(p);
        let xq = self.x.mul_vec(q);
        rp.iter().zip(&xq).zip(&self.v_tilde).map(|((&a, &b), &c)| a + b + c).collect()
    }

    /// Voltage at the given active injections with reactive injections `q`.
    pub fn voltage_at(&self, p: &[T], q: &[T]) -> Vec<T> {
        self.voltage_unchecked(p, q)
    }
}

/// Linearizes the feeder around `linearization`; `v★` comes from the AC sweep.
pub fn compute_sensitivity<T: Scalar>(
    case: &NetworkCase<T>,
    linearization: &OperatingPoint<T>,
) -> Result<SensitivityModel<T>, GridError>
{
    let n = case.pq_count();
    check_len(n, linearization.p.len())?;
    let y = build_reduced_admittance(case)?;
    let z = y.y_ll.inverse()?;
    let slack_injection: Vec<Complex<T>> = y.y_ls.iter().map(|&c| c * case.slack_voltage).collect();
    let e: Vec<Complex<T>> = z.mul_vec(&slack_injection).into_iter().map(|c| -c).collect();
    let two = T::lit(2.0);
    let mut r = Matrix::zeros(n, n);
    let mut x = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let m = e[j] * z[(j, k)].conj() / e[k];
            r[(j, k)] = two * m.re;
            x[(j, k)] = -two * m.im;
        }
    }
    let magnitudes = ac_power_flow(case, linearization)?;
    let v_star: Vec<T> = magnitudes.iter().map(|&v| v * v).collect();
    let rp = r.mul_vec(&linearization.p);
    let xq = x.mul_vec(&linearization.q);
    let v_tilde = (0..n).map(|k| v_star[k] - rp[k] - xq[k]).collect();
    debug_assert!(case.slack_is_unit() || n > 0);
    Ok(SensitivityModel {
        r,
        x,
        v_tilde,
        p_star: linearization.p.clone(),
        q_star: linearization.q.clone(),
        v_star,
    })
}
