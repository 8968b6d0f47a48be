//! Block-wise coordinate descent for the L1-penalized precision matrix.
//!
//! Each column `j` of the covariance estimate `W` is updated through the lasso
//! problem `min ½ β'W₁₁β − β's₁₂ + ρ Σ w_k|β_k|` followed by `w₁₂ = W₁₁β`. The
//! diagonal of `W` is held at `s_jj + ρ·w_jj` throughout. `Θ` is recovered from
//! the final column coefficients using `WΘ = I`.

use crate::error::{CggmError, Result};
use crate::lasso::{solve_quad_lasso, QuadLassoProblem};
use crate::linalg::{
    column_without, drop_index, eigen_range, is_positive_definite, log_det_pd, max_asymmetry,
    symmetrize, Matrix, Vector,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoOptions {
    /// Sweeps stop once the mean absolute change of the off-diagonal of `W` falls
    /// below `tol` times the mean absolute off-diagonal of `S`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    /// Record `log det W` after every sweep.
    pub trace: bool,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_sweeps: 100,
            lasso_tol: 1e-6,
            lasso_max_iter: 1000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlassoResult {
    pub theta: Matrix,
    pub w: Matrix,
    pub sweeps: usize,
    pub converged: bool,
    /// `log det W` after each sweep when tracing. Nondecreasing: every column
    /// step maximizes it over a box around `s₁₂`.
    pub dual_trace: Vec<f64>,
}

/// Graphical lasso on scatter matrix `s` with penalty `rho` and optional
/// element-wise weights. `warm` seeds `W` (off-diagonal) and the column
/// coefficients (from its `Θ`).
pub fn glasso(
    s: &Matrix,
    rho: f64,
    theta_weights: Option<&Matrix>,
    warm: Option<&GlassoResult>,
    opts: &GlassoOptions,
) -> Result<GlassoResult> {
    let p = s.nrows();
    validate(s, rho, theta_weights, warm)?;
    let weight = |i: usize, j: usize| theta_weights.map_or(1.0, |w| w[(i, j)]);

    let mut w = match warm {
        Some(prev) => prev.w.clone(),
        None => s.clone(),
    };
    for i in 0..p {
        w[(i, i)] = s[(i, i)] + rho * weight(i, i);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(CggmError::input("non-finite warm start"));
    }

    if p == 1 {
        let theta = Matrix::from_element(1, 1, 1.0 / w[(0, 0)]);
        return Ok(GlassoResult {
            theta,
            w,
            sweeps: 0,
            converged: true,
            dual_trace: Vec::new(),
        });
    }

    // β_j = −θ_{-j,j} / θ_jj is the column coefficient consistent with Θ.
    let mut betas: Vec<Vector> = (0..p)
        .map(|j| match warm {
            Some(prev) => column_without(&prev.theta, j) * (-1.0 / prev.theta[(j, j)]),
            None => Vector::zeros(p - 1),
        })
        .collect();

    let off_count = (p * (p - 1)) as f64;
    let mean_off_s = off_diagonal_abs_sum(s) / off_count;
    let scale = if mean_off_s > 0.0 {
        mean_off_s
    } else {
        s.diagonal().iter().map(|v| v.abs()).sum::<f64>() / p as f64
    };
    let threshold = opts.tol * scale;

    let mut dual_trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut total_change = 0.0;
        for j in 0..p {
            let w11 = drop_index(&w, j);
            let s12 = column_without(s, j);
            let weights = Vector::from_fn(p - 1, |k, _| weight(skip(k, j), j));
            let prob = QuadLassoProblem::new(w11.clone(), s12, rho)?
                .with_weights(weights)?
                .with_start(betas[j].clone())?;
            let beta = match solve_quad_lasso(&prob, opts.lasso_tol, opts.lasso_max_iter) {
                Ok(b) => b,
                Err(CggmError::NotConverged { last, .. }) => Vector::from_vec(last),
                Err(e) => return Err(e),
            };
            let w12 = &w11 * &beta;
            for k in 0..(p - 1) {
                let r = skip(k, j);
                total_change += 2.0 * (w12[k] - w[(r, j)]).abs();
                w[(r, j)] = w12[k];
                w[(j, r)] = w12[k];
            }
            betas[j] = beta;
        }
        if opts.trace {
            dual_trace.push(log_det_pd(&w).unwrap_or(f64::NEG_INFINITY));
        }
        if total_change / off_count <= threshold {
            converged = true;
            break;
        }
    }

    let mut theta = Matrix::zeros(p, p);
    for j in 0..p {
        let w12 = column_without(&w, j);
        let denom = w[(j, j)] - w12.dot(&betas[j]);
        if !(denom > 0.0) {
            return Err(CggmError::Numerical(format!(
                "lost positive definiteness recovering column {j} (Schur complement {denom:e})"
            )));
        }
        let theta_jj = 1.0 / denom;
        theta[(j, j)] = theta_jj;
        for k in 0..(p - 1) {
            theta[(skip(k, j), j)] = -betas[j][k] * theta_jj;
        }
    }
    symmetrize(&mut theta);
    if !is_positive_definite(&theta) {
        return Err(CggmError::Numerical(
            "recovered precision matrix is not positive definite".into(),
        ));
    }
    if !is_positive_definite(&w) {
        return Err(CggmError::Numerical(
            "covariance estimate is not positive definite".into(),
        ));
    }
    Ok(GlassoResult {
        theta,
        w,
        sweeps,
        converged,
        dual_trace,
    })
}

#[inline]
fn skip(k: usize, j: usize) -> usize {
    if k < j {
        k
    } else {
        k + 1
    }
}

fn off_diagonal_abs_sum(a: &Matrix) -> f64 {
    let mut t = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                t += a[(i, j)].abs();
            }
        }
    }
    t
}

fn validate(
    s: &Matrix,
    rho: f64,
    theta_weights: Option<&Matrix>,
    warm: Option<&GlassoResult>,
) -> Result<()> {
    let p = s.nrows();
    if p == 0 || s.ncols() != p {
        return Err(CggmError::input("scatter matrix must be square and nonempty"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(CggmError::input("non-finite entry in scatter matrix"));
    }
    if max_asymmetry(s) > 1e-10 {
        return Err(CggmError::input("scatter matrix must be symmetric"));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(CggmError::input("rho must be finite and nonnegative"));
    }
    let (lo, hi) = eigen_range(s);
    if lo < -1e-10 * hi.abs().max(1.0) {
        return Err(CggmError::input(format!(
            "scatter matrix is not positive semidefinite (smallest eigenvalue {lo:e})"
        )));
    }
    if let Some(w) = theta_weights {
        if w.shape() != (p, p) || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CggmError::input("theta weights must be p×p, finite, nonnegative"));
        }
    }
    let min_diag_penalty = (0..p)
        .map(|i| rho * theta_weights.map_or(1.0, |w| w[(i, i)]))
        .fold(f64::INFINITY, f64::min);
    if min_diag_penalty <= 0.0 && lo <= 1e-10 * hi.abs().max(1.0) {
        return Err(CggmError::input(
            "an unpenalized diagonal requires a positive definite scatter matrix",
        ));
    }
    if let Some(prev) = warm {
        if prev.w.shape() != (p, p) || prev.theta.shape() != (p, p) {
            return Err(CggmError::input("warm start has the wrong dimension"));
        }
    }
    Ok(())
}

/// Largest violation of `W − S − ρΛ = 0` with `Λ_ij ∈ sgn(Θ_ij)` (weights scale ρ),
/// using `w` as the inverse of `theta`. Entries with `|θ| ≤ zero_tol` count as zero.
pub fn subgradient_violation(
    s: &Matrix,
    rho: f64,
    theta_weights: Option<&Matrix>,
    theta: &Matrix,
    w: &Matrix,
    zero_tol: f64,
) -> f64 {
    let p = s.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let t = rho * theta_weights.map_or(1.0, |m| m[(i, j)]);
            let r = w[(i, j)] - s[(i, j)];
            let v = if theta[(i, j)].abs() > zero_tol {
                (r - t * theta[(i, j)].signum()).abs()
            } else {
                (r.abs() - t).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}
