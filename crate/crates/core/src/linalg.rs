//! Small dense linear algebra: row-major matrices, Gaussian elimination with
//! partial pivoting, and the handful of vector helpers the solvers use.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Field element usable in [`Matrix::solve`]: real scalars and complex numbers.
pub trait Element:
    Copy
    + Zero
    + One
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    /// Magnitude used for pivot selection.
    fn pivot_size(&self) -> f64;
}

macro_rules! impl_element {
    ($($t:ty),*) => {$(
        impl Element for $t {
            fn pivot_size(&self) -> f64 {
                (*self as f64).abs()
            }
        }
    )*};
}
impl_element!(f32, f64);

impl<T: Scalar> Element for Complex<T> {
    fn pivot_size(&self) -> f64 {
        self.norm().as_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("matrix is singular (pivot {pivot} below tolerance)")]
pub struct SingularMatrix {
    pub pivot: usize,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Element> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![E::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = E::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<E>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[E] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<E> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn map<F: Element>(&self, f: impl Fn(E) -> F) -> Matrix<F> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[E]) -> Vec<E> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).fold(E::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// `selfᵀ · y`.
    pub fn mul_vec_transposed(&self, y: &[E]) -> Vec<E> {
        assert_eq!(y.len(), self.rows, "dimension mismatch in mul_vec_transposed");
        let mut out = vec![E::zero(); self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == E::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * yr;
            }
        }
        out
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul_mat");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == E::zero() {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] = out[(r, c)] + a * other[(k, c)];
                }
            }
        }
        out
    }

    /// Solves `self · X = B` column-by-column with partial pivoting.
    pub fn solve_matrix(&self, rhs: &Self) -> Result<Self, SingularMatrix> {
        assert!(self.is_square(), "solve requires a square matrix");
        assert_eq!(rhs.rows, self.rows, "right-hand side has wrong height");
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = self.data.iter().map(Element::pivot_size).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|r| (r, a[(r, k)].pivot_size()))
                .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best <= scale * 1e-14 {
                return Err(SingularMatrix { pivot: k });
            }
            if p != k {
                a.swap_rows(p, k);
                b.swap_rows(p, k);
            }
            let pivot = a[(k, k)];
            for r in k + 1..n {
                let f = a[(r, k)] / pivot;
                if f == E::zero() {
                    continue;
                }
                for c in k..n {
                    a[(r, c)] = a[(r, c)] - f * a[(k, c)];
                }
                for c in 0..m {
                    b[(r, c)] = b[(r, c)] - f * b[(k, c)];
                }
            }
        }
        for c in 0..m {
            for k in (0..n).rev() {
                let mut acc = b[(k, c)];
                for j in k + 1..n {
                    acc = acc - a[(k, j)] * b[(j, c)];
                }
                b[(k, c)] = acc / a[(k, k)];
            }
        }
        Ok(b)
    }

    pub fn solve(&self, rhs: &[E]) -> Result<Vec<E>, SingularMatrix> {
        let b = Matrix { rows: rhs.len(), cols: 1, data: rhs.to_vec() };
        Ok(self.solve_matrix(&b)?.data)
    }

    pub fn inverse(&self) -> Result<Self, SingularMatrix> {
        self.solve_matrix(&Self::identity(self.rows))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl<T: Scalar> Matrix<T> {
    /// Largest `|A_ij − A_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &E {
        &self.data[r * self.cols + c]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut E {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

pub fn sum<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x)
}

pub fn max<T: Scalar>(a: &[T]) -> T {
    a.iter().copied().fold(T::neg_infinity(), T::max)
}

pub fn min<T: Scalar>(a: &[T]) -> T {
    a.iter().copied().fold(T::infinity(), T::min)
}

/// Elementwise projection onto the non-negative orthant.
pub fn project_nonneg<T: Scalar>(a: &mut [T]) {
    for x in a {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}
