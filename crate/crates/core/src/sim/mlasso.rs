//! Multiple-lasso neighbourhood selection: each gene is regressed on all other
//! genes plus the markers, and an edge is kept only when both regressions select
//! each other (AND rule).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{CggmError, Result};
use crate::lasso::{lasso_regression_from, DEFAULT_TOL};
use crate::linalg::{Matrix, Vector};
use crate::model::Dataset;

#[derive(Debug, Clone)]
pub struct MlassoGraph {
    pub adjacency: DMatrix<bool>,
    /// `coefficients[(i, j)]` is gene i's coefficient in gene j's regression.
    pub gene_coefficients: Matrix,
    /// `marker_coefficients[(j, k)]` is marker k's coefficient for gene j.
    pub marker_coefficients: Matrix,
    /// Penalty used for each gene's regression.
    pub penalties: Vec<f64>,
}

fn center_columns(a: &Matrix) -> Matrix {
    let n = a.nrows() as f64;
    let mut out = a.clone();
    for mut c in out.column_iter_mut() {
        let m = c.sum() / n;
        c.add_scalar_mut(-m);
    }
    out
}

/// Design `[Y without column j, X]` and response `Y[:, j]`, both centered.
fn regression_for(y: &Matrix, x: &Matrix, j: usize) -> (Matrix, Vector) {
    let p = y.ncols();
    let q = x.ncols();
    let n = y.nrows();
    let design = Matrix::from_fn(n, p - 1 + q, |r, c| {
        if c < p - 1 {
            y[(r, if c < j { c } else { c + 1 })]
        } else {
            x[(r, c - (p - 1))]
        }
    });
    (design, y.column(j).into_owned())
}

fn assemble(p: usize, q: usize, betas: Vec<(Vector, f64)>, tol: f64) -> MlassoGraph {
    let mut gene_coefficients = Matrix::zeros(p, p);
    let mut marker_coefficients = Matrix::zeros(p, q);
    let mut penalties = Vec::with_capacity(p);
    for (j, (beta, pen)) in betas.into_iter().enumerate() {
        for c in 0..(p - 1) {
            let i = if c < j { c } else { c + 1 };
            gene_coefficients[(i, j)] = beta[c];
        }
        for k in 0..q {
            marker_coefficients[(j, k)] = beta[p - 1 + k];
        }
        penalties.push(pen);
    }
    let adjacency = DMatrix::from_fn(p, p, |i, j| {
        i != j && gene_coefficients[(i, j)].abs() > tol && gene_coefficients[(j, i)].abs() > tol
    });
    MlassoGraph {
        adjacency,
        gene_coefficients,
        marker_coefficients,
        penalties,
    }
}

/// Neighbourhood selection at a single penalty `lambda` for every gene.
pub fn mlasso_graph(data: &Dataset, lambda: f64, tol: f64) -> Result<MlassoGraph> {
    if !(lambda > 0.0) {
        return Err(CggmError::input("lambda must be positive"));
    }
    let y = center_columns(data.y());
    let x = center_columns(data.x());
    let p = data.p();
    let betas = (0..p)
        .into_par_iter()
        .map(|j| {
            let (design, response) = regression_for(&y, &x, j);
            lasso_regression_from(&design, &response, lambda, DEFAULT_TOL, None)
                .map(|b| (b, lambda))
                .map_err(|e| CggmError::Numerical(format!("gene {j}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(p, data.q(), betas, tol))
}

/// Neighbourhood selection with each gene's penalty chosen from `grid` by
/// `n log(RSS/n) + log(n) df`, df being the number of nonzero coefficients.
pub fn mlasso_graph_bic(data: &Dataset, grid: &[f64], tol: f64) -> Result<MlassoGraph> {
    if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0)) {
        return Err(CggmError::input("lambda grid must be nonempty and positive"));
    }
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let y = center_columns(data.y());
    let x = center_columns(data.x());
    let (n, p) = (data.n(), data.p());
    let nf = n as f64;
    let betas = (0..p)
        .into_par_iter()
        .map(|j| {
            let (design, response) = regression_for(&y, &x, j);
            let mut warm: Option<Vector> = None;
            let mut best: Option<(f64, Vector, f64)> = None;
            for &lambda in &order {
                let beta = lasso_regression_from(&design, &response, lambda, DEFAULT_TOL, warm.take())
                    .map_err(|e| CggmError::Numerical(format!("gene {j}: {e}")))?;
                let rss = (&response - &design * &beta).norm_squared().max(f64::MIN_POSITIVE);
                let df = beta.iter().filter(|b| b.abs() > tol).count() as f64;
                let score = nf * (rss / nf).ln() + nf.ln() * df;
                if best.as_ref().map_or(true, |b| score < b.0) {
                    best = Some((score, beta.clone(), lambda));
                }
                warm = Some(beta);
            }
            let (_, beta, lambda) = best.expect("grid is nonempty");
            Ok((beta, lambda))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(p, data.q(), betas, tol))
}

/// Largest penalty at which some gene's regression is nonzero:
/// `max_j ‖D_j' r_j / n‖_∞`.
pub fn mlasso_lambda_max(data: &Dataset) -> f64 {
    let y = center_columns(data.y());
    let x = center_columns(data.x());
    let n = data.n() as f64;
    (0..data.p())
        .map(|j| {
            let (design, response) = regression_for(&y, &x, j);
            (design.tr_mul(&response) / n).amax()
        })
        .fold(0.0, f64::max)
}
