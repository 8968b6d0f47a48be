//! Alternating coordinate descent for the sparse cGGM.
//!
//! 1. Start from the MLE of Γ (or Γ = 0 when `C_X` is singular) with
//!    `W = S_Γ + ρI`.
//! 2. Run the graphical lasso on the residual scatter `S_Γ`.
//! 3. Cycle over the entries of Γ with the closed-form soft-threshold update.
//! 4. Repeat 2 and 3 until the penalized objective stops moving.

use crate::error::{CggmError, Result};
use crate::glasso::{glasso, subgradient_violation, GlassoOptions, GlassoResult};
use crate::lasso::soft_threshold;
use crate::linalg::{inverse_pd, Matrix};
use crate::model::{mle_fit, penalized_objective, residual_scatter, CggmFit, PenaltySpec, SufficientStats};

/// Ceiling for adaptive weights built from zero (or tiny) pilot estimates.
pub const WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative change of the penalized objective between outer iterations.
    pub tol_outer: f64,
    pub max_outer: usize,
    /// Largest entry change of Γ between inner passes.
    pub tol_inner: f64,
    pub max_inner: usize,
    /// Mean-center Y and X before forming statistics (used by data-level helpers).
    pub center: bool,
    /// Keep the glasso dual trace.
    pub trace: bool,
    /// Update Γ before Θ in each outer iteration.
    pub gamma_first: bool,
    /// Largest allowed violation of either block's optimality conditions at
    /// convergence, checked in addition to `tol_outer`.
    pub kkt_tol: f64,
    pub glasso: GlassoOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_outer: 1e-6,
            max_outer: 200,
            tol_inner: 1e-6,
            max_inner: 100,
            center: true,
            trace: false,
            gamma_first: false,
            kkt_tol: 1e-4,
            glasso: GlassoOptions {
                tol: 1e-6,
                max_sweeps: 500,
                lasso_tol: 1e-8,
                lasso_max_iter: 10_000,
                trace: false,
            },
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol_outer > 0.0 && self.tol_inner > 0.0 && self.glasso.tol > 0.0 && self.kkt_tol > 0.0) {
            return Err(CggmError::input("tolerances must be positive"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(CggmError::input("iteration limits must be at least one"));
        }
        Ok(())
    }
}

/// Starting values `(Γ₀, W₀)`.
pub fn init(stats: &SufficientStats, rho: f64) -> (Matrix, Matrix) {
    let p = stats.p();
    let gamma0 = if stats.c_x_invertible() {
        inverse_pd(&stats.c_x)
            .map(|inv| &stats.c_yx * inv)
            .unwrap_or_else(|_| Matrix::zeros(p, stats.q()))
    } else {
        Matrix::zeros(p, stats.q())
    };
    let mut w0 = residual_scatter(stats, &gamma0).expect("conforming by construction");
    for i in 0..p {
        w0[(i, i)] += rho;
    }
    (gamma0, w0)
}

/// One or more cyclic passes of the Γ update for a fixed Θ.
///
/// Keeps `A = ΘC_YX` and `M = ΓC_X` so a single entry update costs O(p + q).
struct GammaUpdater<'a> {
    stats: &'a SufficientStats,
    theta: &'a Matrix,
    a: Matrix,
    m: Matrix,
    lambda: f64,
    weights: Option<&'a Matrix>,
}

impl<'a> GammaUpdater<'a> {
    fn new(
        stats: &'a SufficientStats,
        theta: &'a Matrix,
        gamma: &Matrix,
        lambda: f64,
        weights: Option<&'a Matrix>,
    ) -> Self {
        Self {
            stats,
            theta,
            a: theta * &stats.c_yx,
            m: gamma * &stats.c_x,
            lambda,
            weights,
        }
    }

    /// `g_ij` evaluated at the current working Γ.
    fn g(&self, gamma: &Matrix, i: usize, j: usize) -> f64 {
        let theta_m: f64 = self.theta.column(i).dot(&self.m.column(j));
        let c_jj = self.stats.c_x[(j, j)];
        2.0 * (self.a[(i, j)] + c_jj * self.theta[(i, i)] * gamma[(i, j)] - theta_m)
    }

    fn pass(&mut self, gamma: &mut Matrix, degenerate: &mut Vec<usize>) -> f64 {
        let (p, q) = gamma.shape();
        let mut max_change = 0.0_f64;
        for i in 0..p {
            for j in 0..q {
                let c_jj = self.stats.c_x[(j, j)];
                let old = gamma[(i, j)];
                let new = if c_jj <= 0.0 {
                    if !degenerate.contains(&j) {
                        degenerate.push(j);
                    }
                    0.0
                } else {
                    let g = self.g(gamma, i, j);
                    let t = self.lambda * self.weights.map_or(1.0, |w| w[(i, j)]);
                    soft_threshold(g, t) / (2.0 * c_jj * self.theta[(i, i)])
                };
                let delta = new - old;
                if delta != 0.0 {
                    gamma[(i, j)] = new;
                    // M = ΓC_X: row i moves by δ·C_X[j, :]
                    for k in 0..q {
                        self.m[(i, k)] += delta * self.stats.c_x[(j, k)];
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
        }
        max_change
    }
}

/// Result of [`update_gamma`].
#[derive(Debug, Clone)]
pub struct GammaSweep {
    pub gamma: Matrix,
    pub max_change: f64,
    /// Marker columns with `C_X[j, j] = 0`; their coefficients are set to zero.
    pub degenerate_columns: Vec<usize>,
}

/// One full cyclic pass over the entries of Γ (rows outer, markers inner),
/// each entry updated in place from the current working Γ.
pub fn update_gamma(
    stats: &SufficientStats,
    theta: &Matrix,
    gamma_prev: &Matrix,
    lambda: f64,
    gamma_weights: Option<&Matrix>,
) -> Result<GammaSweep> {
    check_gamma_inputs(stats, theta, gamma_prev)?;
    let mut gamma = gamma_prev.clone();
    let mut degenerate = Vec::new();
    let mut up = GammaUpdater::new(stats, theta, &gamma, lambda, gamma_weights);
    let max_change = up.pass(&mut gamma, &mut degenerate);
    Ok(GammaSweep {
        gamma,
        max_change,
        degenerate_columns: degenerate,
    })
}

fn check_gamma_inputs(stats: &SufficientStats, theta: &Matrix, gamma: &Matrix) -> Result<()> {
    let p = stats.p();
    if theta.shape() != (p, p) || gamma.shape() != (p, stats.q()) {
        return Err(CggmError::input("theta or gamma has the wrong shape"));
    }
    if theta.diagonal().iter().any(|d| !(*d > 0.0)) {
        return Err(CggmError::Domain("theta must have a positive diagonal".into()));
    }
    Ok(())
}

/// `∂l/∂γ_ij = 2(ΘΓC_X − ΘC_YX)_ij`, the smooth part of the Γ gradient.
pub fn gamma_gradient(stats: &SufficientStats, theta: &Matrix, gamma: &Matrix) -> Matrix {
    (theta * gamma * &stats.c_x - theta * &stats.c_yx) * 2.0
}

/// Largest violation of the Γ optimality conditions at `(Θ, Γ)`.
pub fn gamma_kkt_violation(
    stats: &SufficientStats,
    theta: &Matrix,
    gamma: &Matrix,
    pen: &PenaltySpec,
) -> f64 {
    let grad = gamma_gradient(stats, theta, gamma);
    let mut worst = 0.0_f64;
    for i in 0..gamma.nrows() {
        for j in 0..gamma.ncols() {
            let t = pen.lambda * pen.gamma_weight(i, j);
            let v = if gamma[(i, j)] == 0.0 {
                if t.is_infinite() {
                    0.0
                } else {
                    (grad[(i, j)].abs() - t).max(0.0)
                }
            } else {
                (grad[(i, j)] + t * gamma[(i, j)].signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

struct OuterState<'a> {
    stats: &'a SufficientStats,
    pen: &'a PenaltySpec,
    opts: &'a SolveOptions,
    gamma: Matrix,
    glasso: Option<GlassoResult>,
    trace: Vec<f64>,
    warnings: Vec<String>,
}

impl OuterState<'_> {
    fn slack(obj: f64) -> f64 {
        1e-8 * (1.0 + obj.abs())
    }

    fn current(&self) -> Option<f64> {
        self.trace.last().copied()
    }

    /// Larger of the Θ and Γ optimality violations at the current iterate.
    fn kkt_residual(&self) -> Result<f64> {
        let g = self.glasso.as_ref().expect("a theta step has run");
        let s = residual_scatter(self.stats, &self.gamma)?;
        let theta_v = subgradient_violation(
            &s,
            self.pen.rho,
            self.pen.theta_weights.as_ref(),
            &g.theta,
            &g.w,
            crate::selection::NONZERO_TOL,
        );
        let gamma_v = gamma_kkt_violation(self.stats, &g.theta, &self.gamma, self.pen);
        Ok(theta_v.max(gamma_v))
    }

    /// Θ step. A candidate that does not lower the objective is discarded.
    fn theta_step(&mut self) -> Result<()> {
        let s = residual_scatter(self.stats, &self.gamma)?;
        let mut gopts = self.opts.glasso.clone();
        gopts.trace = self.opts.trace;
        let cand = glasso(
            &s,
            self.pen.rho,
            self.pen.theta_weights.as_ref(),
            self.glasso.as_ref(),
            &gopts,
        )?;
        if !cand.converged {
            self.warnings.push(format!(
                "graphical lasso stopped after {} sweeps without converging",
                cand.sweeps
            ));
        }
        let obj = penalized_objective(self.stats, &cand.theta, &self.gamma, self.pen)?;
        match self.current() {
            Some(prev) if obj > prev + Self::slack(prev) => {
                // keep the previous Θ; record the unchanged objective
                self.trace.push(prev);
            }
            _ => {
                self.glasso = Some(cand);
                self.trace.push(obj);
            }
        }
        Ok(())
    }

    /// Γ step: inner passes until the largest change is below `tol_inner`.
    fn gamma_step(&mut self) -> Result<()> {
        let theta = match &self.glasso {
            Some(g) => g.theta.clone(),
            None => unreachable!("gamma step requires a precision estimate"),
        };
        let mut degenerate = Vec::new();
        let mut up = GammaUpdater::new(
            self.stats,
            &theta,
            &self.gamma,
            self.pen.lambda,
            self.pen.gamma_weights.as_ref(),
        );
        let mut inner_converged = false;
        for _ in 0..self.opts.max_inner {
            if up.pass(&mut self.gamma, &mut degenerate) <= self.opts.tol_inner {
                inner_converged = true;
                break;
            }
        }
        if !inner_converged {
            self.warnings.push(format!(
                "gamma passes hit the cap of {} without converging",
                self.opts.max_inner
            ));
        }
        for j in degenerate {
            let msg = format!("marker {j} has zero variance; its coefficients are fixed at zero");
            if !self.warnings.contains(&msg) {
                self.warnings.push(msg);
            }
        }
        let obj = penalized_objective(self.stats, &theta, &self.gamma, self.pen)?;
        if let Some(prev) = self.current() {
            if obj > prev + Self::slack(prev) {
                return Err(CggmError::ObjectiveIncrease {
                    before: prev,
                    after: obj,
                    step: self.trace.len(),
                });
            }
        }
        self.trace.push(obj);
        Ok(())
    }
}

/// Sparse cGGM by alternating graphical lasso and Γ coordinate descent.
pub fn fit(stats: &SufficientStats, pen: &PenaltySpec, opts: &SolveOptions) -> Result<CggmFit> {
    fit_from(stats, pen, opts, None)
}

/// [`fit`] started from a previous fit (e.g. a neighbouring grid cell).
pub fn fit_from(
    stats: &SufficientStats,
    pen: &PenaltySpec,
    opts: &SolveOptions,
    warm: Option<&CggmFit>,
) -> Result<CggmFit> {
    pen.validate(stats.p(), stats.q())?;
    opts.validate()?;
    if !(pen.rho > 0.0) {
        return Err(CggmError::input("rho must be positive"));
    }
    if !pen.rho.is_finite() {
        return Err(CggmError::input("rho must be finite"));
    }

    let (gamma0, glasso0) = match warm {
        Some(prev) => {
            if prev.gamma.shape() != (stats.p(), stats.q()) {
                return Err(CggmError::input("warm start has the wrong dimension"));
            }
            let g = GlassoResult {
                theta: prev.theta.clone(),
                w: prev.w.clone(),
                sweeps: 0,
                converged: true,
                dual_trace: Vec::new(),
            };
            (prev.gamma.clone(), Some(g))
        }
        None => (init(stats, pen.rho).0, None),
    };

    let mut state = OuterState {
        stats,
        pen,
        opts,
        gamma: gamma0,
        glasso: glasso0,
        trace: Vec::new(),
        warnings: Vec::new(),
    };

    if opts.gamma_first && state.glasso.is_none() {
        let (_, w0) = init(stats, pen.rho);
        let theta0 = inverse_pd(&w0)?;
        state.glasso = Some(GlassoResult {
            theta: theta0,
            w: w0,
            sweeps: 0,
            converged: true,
            dual_trace: Vec::new(),
        });
    }
    if let Some(g) = &state.glasso {
        let obj = penalized_objective(stats, &g.theta, &state.gamma, pen)?;
        state.trace.push(obj);
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut last_outer = state.current();
    while iterations < opts.max_outer {
        iterations += 1;
        if opts.gamma_first {
            state.gamma_step()?;
            state.theta_step()?;
        } else {
            state.theta_step()?;
            state.gamma_step()?;
        }
        let now = state.current().expect("trace is nonempty after a step");
        if let Some(before) = last_outer {
            if before.is_finite()
                && (before - now).abs() <= opts.tol_outer * now.abs().max(1.0)
                && state.kkt_residual()? <= opts.kkt_tol
            {
                converged = true;
                break;
            }
        }
        last_outer = Some(now);
    }

    let g = state.glasso.expect("at least one theta step ran");
    Ok(CggmFit {
        theta: g.theta,
        w: g.w,
        gamma: state.gamma,
        penalty: pen.clone(),
        objective_trace: state.trace,
        iterations,
        converged,
        warnings: state.warnings,
    })
}

/// Adaptive weights `|x̃|^{-exponent}` from the unpenalized MLE, capped at [`WEIGHT_CAP`].
pub fn adaptive_weights(stats: &SufficientStats, exponent: f64) -> Result<(Matrix, Matrix)> {
    let (theta, gamma) = mle_fit(stats).map_err(|e| match e {
        CggmError::Rank(msg) => CggmError::Rank(format!(
            "{msg}; adaptive weights need the MLE, use the non-adaptive fit instead"
        )),
        other => other,
    })?;
    let weight = |x: f64| {
        let w = x.abs().powf(-exponent);
        if w.is_finite() {
            w.min(WEIGHT_CAP)
        } else {
            WEIGHT_CAP
        }
    };
    Ok((gamma.map(weight), theta.map(weight)))
}

/// Adaptive-lasso cGGM with MLE-based weights and exponent 0.5.
pub fn fit_adaptive(
    stats: &SufficientStats,
    lambda: f64,
    rho: f64,
    opts: &SolveOptions,
) -> Result<CggmFit> {
    let (gw, tw) = adaptive_weights(stats, PenaltySpec::DEFAULT_EXPONENT)?;
    fit(stats, &PenaltySpec::weighted(lambda, rho, gw, tw), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use approx::assert_abs_diff_eq;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    #[test]
    fn init_with_identity_markers() {
        let c_y = m(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let c_yx = m(2, 2, &[0.4, 0.1, -0.2, 0.3]);
        let stats = SufficientStats::from_parts(c_y.clone(), c_yx.clone(), Matrix::identity(2, 2), 100).unwrap();
        let (g0, w0) = init(&stats, 0.25);
        assert_abs_diff_eq!(g0, c_yx, epsilon = 1e-14);
        let expect = c_y - &c_yx * c_yx.transpose() + Matrix::identity(2, 2) * 0.25;
        assert_abs_diff_eq!(w0, expect, epsilon = 1e-14);
    }

    #[test]
    fn init_falls_back_on_singular_markers() {
        let c_y = m(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let c_yx = m(2, 2, &[0.4, 0.4, -0.2, -0.2]);
        let c_x = m(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let stats = SufficientStats::from_parts(c_y.clone(), c_yx, c_x, 1).unwrap();
        let (g0, w0) = init(&stats, 0.5);
        assert_eq!(g0, Matrix::zeros(2, 2));
        assert_abs_diff_eq!(w0, c_y + Matrix::identity(2, 2) * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn init_zero_cross_covariance() {
        let stats = SufficientStats::from_parts(Matrix::identity(2, 2), Matrix::zeros(2, 1), m(1, 1, &[0.3]), 10).unwrap();
        assert_eq!(init(&stats, 0.1).0, Matrix::zeros(2, 1));
        let singular = SufficientStats { c_x: Matrix::zeros(1, 1), ..stats };
        assert_eq!(init(&singular, 0.1).0, Matrix::zeros(2, 1));
    }

    #[test]
    fn scalar_gamma_update() {
        let stats = SufficientStats::from_parts(m(1, 1, &[2.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), 10).unwrap();
        let r = update_gamma(&stats, &m(1, 1, &[1.0]), &Matrix::zeros(1, 1), 0.5, None).unwrap();
        assert_abs_diff_eq!(r.gamma[(0, 0)], 0.75, epsilon = 1e-15);
        // closed form c − λ/(2θ) for the one-dimensional objective
        assert_abs_diff_eq!(r.gamma[(0, 0)], 1.0 - 0.5 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gamma_update_below_threshold_is_zero() {
        let stats = SufficientStats::from_parts(
            Matrix::identity(2, 2),
            m(2, 2, &[0.1, -0.2, 0.05, 0.0]),
            Matrix::identity(2, 2),
            50,
        )
        .unwrap();
        let theta = Matrix::identity(2, 2);
        let r = update_gamma(&stats, &theta, &Matrix::zeros(2, 2), 0.41, None).unwrap();
        assert_eq!(r.gamma, Matrix::zeros(2, 2));
    }

    #[test]
    fn unpenalized_passes_reach_least_squares() {
        let c_x = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 2.0, 1.0]));
        let c_yx = m(2, 3, &[0.3, -0.4, 0.2, 0.1, 0.6, -0.5]);
        let stats = SufficientStats::from_parts(Matrix::identity(2, 2) * 3.0, c_yx.clone(), c_x.clone(), 100).unwrap();
        let theta = Matrix::identity(2, 2);
        let mut gamma = Matrix::zeros(2, 3);
        for _ in 0..5 {
            gamma = update_gamma(&stats, &theta, &gamma, 0.0, None).unwrap().gamma;
        }
        let ls = c_yx * c_x.try_inverse().unwrap();
        assert_abs_diff_eq!(gamma, ls, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_marker_is_flagged() {
        let stats = SufficientStats::from_parts(
            Matrix::identity(1, 1),
            m(1, 2, &[0.5, 0.0]),
            m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            10,
        )
        .unwrap();
        let r = update_gamma(&stats, &Matrix::identity(1, 1), &m(1, 2, &[0.0, 3.0]), 0.1, None).unwrap();
        assert_eq!(r.degenerate_columns, vec![1]);
        assert_eq!(r.gamma[(0, 1)], 0.0);
    }

    #[test]
    fn adaptive_weight_arithmetic() {
        // Θ̃ = 1/4 would give weight 2; Γ̃ = 4 gives 4^{-1/2}
        let stats = SufficientStats::from_parts(m(1, 1, &[16.0 + 4.0]), m(1, 1, &[4.0]), m(1, 1, &[1.0]), 10).unwrap();
        let (gw, tw) = adaptive_weights(&stats, 0.5).unwrap();
        assert_abs_diff_eq!(gw[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(tw[(0, 0)], 2.0, epsilon = 1e-14);
        let zero = SufficientStats::from_parts(m(1, 1, &[1.0]), m(1, 1, &[0.0]), m(1, 1, &[1.0]), 10).unwrap();
        let (gw, _) = adaptive_weights(&zero, 0.5).unwrap();
        assert_eq!(gw[(0, 0)], WEIGHT_CAP);
    }

    #[test]
    fn adaptive_requires_mle() {
        let stats = SufficientStats::from_parts(Matrix::identity(3, 3), Matrix::zeros(3, 1), m(1, 1, &[1.0]), 3).unwrap();
        assert!(matches!(fit_adaptive(&stats, 0.1, 0.1, &SolveOptions::default()), Err(CggmError::Rank(_))));
    }

    #[test]
    fn fit_rejects_bad_penalties() {
        let stats = SufficientStats::from_parts(Matrix::identity(2, 2), Matrix::zeros(2, 1), m(1, 1, &[1.0]), 10).unwrap();
        let o = SolveOptions::default();
        assert!(fit(&stats, &PenaltySpec::lasso(0.1, 0.0), &o).is_err());
        assert!(fit(&stats, &PenaltySpec::lasso(-0.1, 0.1), &o).is_err());
    }
}
