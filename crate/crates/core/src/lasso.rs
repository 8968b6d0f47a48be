//! Weighted L1-penalized quadratic problems solved by cyclic coordinate descent.
//!
//! The kernel minimizes `½ β'Qβ − β'c + t Σ w_j |β_j|`. The graphical lasso column
//! step uses it with `Q = W₁₁`, `c = s₁₂`; the neighbourhood-selection baseline uses
//! it with `Q = D'D/n`, `c = D'r/n`.

use crate::error::{CggmError, Result};
use crate::linalg::{max_asymmetry, Matrix, Vector};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// `sgn(z) · max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct QuadLassoProblem {
    q: Matrix,
    linear: Vector,
    penalty: f64,
    weights: Option<Vector>,
    start: Option<Vector>,
}

impl QuadLassoProblem {
    pub fn new(q: Matrix, linear: Vector, penalty: f64) -> Result<Self> {
        let d = linear.len();
        if q.shape() != (d, d) {
            return Err(CggmError::input(format!(
                "quadratic form is {:?}, expected ({d}, {d})",
                q.shape()
            )));
        }
        if !(penalty >= 0.0) {
            return Err(CggmError::input("lasso penalty must be nonnegative"));
        }
        if max_asymmetry(&q) > 1e-10 {
            return Err(CggmError::input("quadratic form must be symmetric"));
        }
        Ok(Self {
            q,
            linear,
            penalty,
            weights: None,
            start: None,
        })
    }

    pub fn with_weights(mut self, weights: Vector) -> Result<Self> {
        if weights.len() != self.dim() {
            return Err(CggmError::input("weight vector has the wrong length"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CggmError::input("lasso weights must be finite and nonnegative"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_start(mut self, start: Vector) -> Result<Self> {
        if start.len() != self.dim() {
            return Err(CggmError::input("start vector has the wrong length"));
        }
        self.start = Some(start);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    fn threshold(&self, j: usize) -> f64 {
        self.penalty * self.weights.as_ref().map_or(1.0, |w| w[j])
    }

    /// `½ β'Qβ − β'c + t Σ w_j |β_j|`.
    pub fn objective(&self, beta: &Vector) -> f64 {
        let quad = 0.5 * beta.dot(&(&self.q * beta));
        let pen: f64 = (0..self.dim())
            .filter(|&j| beta[j] != 0.0)
            .map(|j| self.threshold(j) * beta[j].abs())
            .sum();
        quad - beta.dot(&self.linear) + pen
    }

    /// Largest violation of the optimality conditions at `beta`.
    pub fn kkt_violation(&self, beta: &Vector) -> f64 {
        let grad = &self.q * beta - &self.linear;
        (0..self.dim())
            .map(|j| {
                let t = self.threshold(j);
                if beta[j] == 0.0 {
                    (grad[j].abs() - t).max(0.0)
                } else {
                    (grad[j] + t * beta[j].signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Result of a coordinate-descent run.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: Vector,
    pub sweeps: usize,
    /// Objective after each sweep, present only when tracing was requested.
    pub trace: Vec<f64>,
}

/// Cyclic coordinate descent in ascending index order; stops when the largest
/// coordinate change in a sweep is at most `tol`.
pub fn solve_quad_lasso(prob: &QuadLassoProblem, tol: f64, max_iter: usize) -> Result<Vector> {
    run(prob, tol, max_iter, false, None).map(|s| s.beta)
}

/// As [`solve_quad_lasso`], recording the objective after every sweep.
pub fn solve_quad_lasso_traced(
    prob: &QuadLassoProblem,
    tol: f64,
    max_iter: usize,
) -> Result<LassoSolution> {
    run(prob, tol, max_iter, true, None)
}

/// As [`solve_quad_lasso`] with an explicit coordinate visiting order.
pub fn solve_quad_lasso_ordered(
    prob: &QuadLassoProblem,
    tol: f64,
    max_iter: usize,
    order: &[usize],
) -> Result<Vector> {
    let mut seen = vec![false; prob.dim()];
    for &j in order {
        if j >= prob.dim() || std::mem::replace(&mut seen[j], true) {
            return Err(CggmError::input("order must be a permutation of the coordinates"));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(CggmError::input("order must be a permutation of the coordinates"));
    }
    run(prob, tol, max_iter, false, Some(order)).map(|s| s.beta)
}

fn run(
    prob: &QuadLassoProblem,
    tol: f64,
    max_iter: usize,
    trace: bool,
    order: Option<&[usize]>,
) -> Result<LassoSolution> {
    if !(tol > 0.0) {
        return Err(CggmError::input("tolerance must be positive"));
    }
    let d = prob.dim();
    let mut beta = prob.start.clone().unwrap_or_else(|| Vector::zeros(d));
    let ascending: Vec<usize> = (0..d).collect();
    let order = order.unwrap_or(&ascending);
    let mut objective_trace = Vec::new();
    if d == 0 {
        return Ok(LassoSolution {
            beta,
            sweeps: 0,
            trace: objective_trace,
        });
    }

    for sweep in 1..=max_iter {
        let mut max_change = 0.0_f64;
        for &j in order {
            let qjj = prob.q[(j, j)];
            let row_dot: f64 = prob.q.column(j).dot(&beta) - qjj * beta[j];
            let z = prob.linear[j] - row_dot;
            let t = prob.threshold(j);
            let new = if qjj > 0.0 {
                soft_threshold(z, t) / qjj
            } else if z.abs() <= t {
                0.0
            } else {
                return Err(CggmError::input(format!(
                    "coordinate {j} has zero curvature and is unbounded below"
                )));
            };
            max_change = max_change.max((new - beta[j]).abs());
            beta[j] = new;
        }
        if trace {
            objective_trace.push(prob.objective(&beta));
        }
        if max_change <= tol {
            return Ok(LassoSolution {
                beta,
                sweeps: sweep,
                trace: objective_trace,
            });
        }
    }
    Err(CggmError::NotConverged {
        what: "lasso coordinate descent".into(),
        iterations: max_iter,
        last: beta.as_slice().to_vec(),
    })
}

/// Penalized least squares `(1/2n)‖r − Dβ‖² + t‖β‖₁` via the Gram form.
pub fn lasso_regression(
    design: &Matrix,
    response: &Vector,
    penalty: f64,
    tol: f64,
) -> Result<Vector> {
    lasso_regression_from(design, response, penalty, tol, None)
}

/// [`lasso_regression`] with an optional warm start.
pub fn lasso_regression_from(
    design: &Matrix,
    response: &Vector,
    penalty: f64,
    tol: f64,
    start: Option<Vector>,
) -> Result<Vector> {
    if design.nrows() != response.len() {
        return Err(CggmError::input("design and response row counts differ"));
    }
    let n = design.nrows() as f64;
    let gram = crate::linalg::symmetrized(design.tr_mul(design) / n);
    let linear = design.tr_mul(response) / n;
    let mut prob = QuadLassoProblem::new(gram, linear, penalty)?;
    if let Some(s) = start {
        prob = prob.with_start(s)?;
    }
    solve_quad_lasso(&prob, tol, DEFAULT_MAX_ITER)
}
