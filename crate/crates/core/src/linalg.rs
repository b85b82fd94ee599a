//! Small dense linear-algebra helpers shared by the optimisers.

use nalgebra::DMatrix;

use crate::{CMat, CVec, C64};

/// Largest entry magnitude of `a - a^H`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Number of singular values above `tol`.
pub fn numerical_rank(a: &CMat, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Largest eigenvalue of a real symmetric matrix (0 for an empty matrix).
pub fn max_eigenvalue_real(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `u v^H`.
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// `u^H v`.
pub fn inner(u: &CVec, v: &CVec) -> C64 {
    u.dotc(v)
}

/// Real part of a Hermitian matrix, i.e. the matrix of the quadratic form on
/// real vectors.
pub fn real_part(a: &CMat) -> DMatrix<f64> {
    a.map(|z| z.re)
}
