//! Float linear algebra used by the diagnostics (faer underneath).

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_bigint::BigInt;
use num_traits::Zero;

use crate::matrix::IntMatrix;
use crate::num::{to_f64, Q};

pub type FMat = Mat<f64>;

/// Converts exact entries (row-major) to floats after a common power-of-two rescaling.
/// Returns the matrix and the exponent e with true value = float·2^e.
pub fn scaled_f64(rows: usize, cols: usize, entries: &[Q]) -> (FMat, i64) {
    let top = entries
        .iter()
        .filter(|x| !x.is_zero())
        .map(|x| x.numer().bits() as i64 - x.denom().bits() as i64)
        .max()
        .unwrap_or(0);
    let e = (top - 500).max(0);
    let scale = Q::from_integer(BigInt::from(1) << (e as u64));
    let data: Vec<f64> = entries.iter().map(|x| to_f64(&(x / &scale))).collect();
    (Mat::from_fn(rows, cols, |i, j| data[i * cols + j]), e)
}

pub fn int_scaled(m: &IntMatrix) -> (FMat, i64) {
    let entries: Vec<Q> = m.rows().into_iter().flatten().map(Q::from_integer).collect();
    scaled_f64(m.dim(), m.dim(), &entries)
}

/// (singular values, U, V), singular values nonincreasing.
pub fn svd(m: &FMat) -> (Vec<f64>, FMat, FMat) {
    let s = m.svd().expect("svd converges");
    let sv = s.S().column_vector();
    let vals = (0..sv.nrows()).map(|i| sv[i]).collect();
    (vals, s.U().to_owned(), s.V().to_owned())
}

pub fn inverse(m: &FMat) -> FMat {
    m.partial_piv_lu().inverse()
}

/// Orthonormal basis (columns) of the orthogonal complement of the orthonormal columns of `b`.
pub fn complement(b: &FMat) -> FMat {
    let d = b.nrows();
    let p = FMat::identity(d, d) - b * b.transpose();
    let (_, u, _) = svd(&p);
    u.subcols(0, d - b.ncols()).to_owned()
}

pub fn frobenius(m: &FMat) -> f64 {
    m.norm_l2()
}

pub fn column(v: &[f64]) -> FMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Eigenvalues as (re, im) pairs.
pub fn eigenvalues(m: &FMat) -> Vec<(f64, f64)> {
    m.eigenvalues().expect("eigen solver converges").into_iter().map(|z| (z.re, z.im)).collect()
}
