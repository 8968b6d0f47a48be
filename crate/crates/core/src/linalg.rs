//! Small dense helpers on top of nalgebra shared by the solvers and metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CggmError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Replace `a` with `(a + a') / 2`.
pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub fn symmetrized(mut a: Matrix) -> Matrix {
    symmetrize(&mut a);
    a
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn max_asymmetry(a: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn all_finite(a: &Matrix) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Lower Cholesky factor, or `None` when `a` is not numerically positive definite.
pub fn cholesky_factor(a: &Matrix) -> Option<Matrix> {
    if a.nrows() != a.ncols() || !all_finite(a) {
        return None;
    }
    let chol = a.clone().cholesky()?;
    let l = chol.unpack();
    if l.diagonal().iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return None;
    }
    Some(l)
}

pub fn is_positive_definite(a: &Matrix) -> bool {
    cholesky_factor(a).is_some()
}

/// `log det a` for a positive definite matrix.
pub fn log_det_pd(a: &Matrix) -> Result<f64> {
    let l = cholesky_factor(a)
        .ok_or_else(|| CggmError::Domain("matrix is not positive definite".into()))?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Inverse of a positive definite matrix via Cholesky, symmetrized.
pub fn inverse_pd(a: &Matrix) -> Result<Matrix> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| CggmError::Rank("matrix is not positive definite".into()))?;
    Ok(symmetrized(chol.inverse()))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(a: &Matrix) -> (f64, f64) {
    if a.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(a.clone());
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Invertibility test used for C_X: smallest eigenvalue above `rel` times the largest.
pub fn is_well_conditioned(a: &Matrix, rel: f64) -> bool {
    if a.nrows() == 0 {
        return false;
    }
    let (lo, hi) = eigen_range(a);
    hi > 0.0 && lo > rel * hi
}

/// `trace(a * b)` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut t = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

/// Copy of `a` with row and column `j` removed.
pub fn drop_index(a: &Matrix, j: usize) -> Matrix {
    let n = a.nrows();
    Matrix::from_fn(n - 1, n - 1, |r, c| {
        let rr = if r < j { r } else { r + 1 };
        let cc = if c < j { c } else { c + 1 };
        a[(rr, cc)]
    })
}

/// Column `j` of `a` without its `j`-th entry.
pub fn column_without(a: &Matrix, j: usize) -> Vector {
    let n = a.nrows();
    Vector::from_fn(n - 1, |r, _| {
        let rr = if r < j { r } else { r + 1 };
        a[(rr, j)]
    })
}

pub fn count_nonzero(a: &Matrix, tol: f64) -> usize {
    a.iter().filter(|v| v.abs() > tol).count()
}

pub fn count_nonzero_off_diagonal(a: &Matrix, tol: f64) -> usize {
    let mut n = 0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j && a[(i, j)].abs() > tol {
                n += 1;
            }
        }
    }
    n
}
