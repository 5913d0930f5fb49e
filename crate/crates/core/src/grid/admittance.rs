use num_complex::Complex;
use num_traits::{One, Zero};

use super::{GridError, NetworkCase};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Bus admittance matrix split around the slack bus.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAdmittance<T> {
    /// PQ-to-PQ block, `n × n`.
    pub y_ll: Matrix<Complex<T>>,
    /// PQ-to-slack coupling column, length `n`.
    pub y_ls: Vec<Complex<T>>,
}

pub fn build_reduced_admittance<T: Scalar>(case: &NetworkCase<T>) -> Result<ReducedAdmittance<T>, GridError>
{
    case.validate()?;
    let index = case.pq_index();
    let n = case.pq_count();
    let mut y_ll = Matrix::zeros(n, n);
    let mut y_ls = vec![Complex::zero(); n];
    for line in &case.lines {
        let y = Complex::<T>::one() / line.impedance();
        match (index[line.from], index[line.to]) {
            (Some(a), Some(b)) => {
                y_ll[(a, a)] = y_ll[(a, a)] + y;
                y_ll[(b, b)] = y_ll[(b, b)] + y;
                y_ll[(a, b)] = y_ll[(a, b)] - y;
                y_ll[(b, a)] = y_ll[(b, a)] - y;
            }
            (Some(a), None) | (None, Some(a)) => {
                y_ll[(a, a)] = y_ll[(a, a)] + y;
                y_ls[a] = y_ls[a] - y;
            }
            (None, None) => unreachable!("validated: no self loops"),
        }
    }
    Ok(ReducedAdmittance { y_ll, y_ls })
}
