//! The conditional Gaussian graphical model `y | x ~ N(Γx, Θ⁻¹)`: data, sufficient
//! statistics, the negative log-likelihood and the penalized objective that the
//! solvers minimize.

use crate::error::{CggmError, Result};
use crate::linalg::{
    all_finite, inverse_pd, is_well_conditioned, log_det_pd, max_asymmetry, symmetrized,
    trace_product, Matrix,
};

/// Relative eigenvalue floor below which `C_X` is treated as singular.
pub const INVERTIBILITY_RATIO: f64 = 1e-10;

/// Paired expression (`y`, n×p) and marker (`x`, n×q) observations, rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Matrix,
    x: Matrix,
}

impl Dataset {
    pub fn new(y: Matrix, x: Matrix) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(CggmError::input(format!(
                "expression has {} rows but markers have {}",
                y.nrows(),
                x.nrows()
            )));
        }
        if y.nrows() < 2 {
            return Err(CggmError::input("at least two samples are required"));
        }
        if y.ncols() == 0 {
            return Err(CggmError::input("expression matrix has no columns"));
        }
        if !all_finite(&y) || !all_finite(&x) {
            return Err(CggmError::input("non-finite entry in data"));
        }
        Ok(Self { y, x })
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.y, self.x)
    }
}

/// Cross-product matrices `C_Y`, `C_YX`, `C_X` (all scaled by 1/n). This is the
/// solvers' only view of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub c_y: Matrix,
    pub c_yx: Matrix,
    pub c_x: Matrix,
    pub n: usize,
}

impl SufficientStats {
    /// Build from precomputed cross products, checking shapes and symmetry.
    pub fn from_parts(c_y: Matrix, c_yx: Matrix, c_x: Matrix, n: usize) -> Result<Self> {
        let p = c_y.nrows();
        let q = c_x.nrows();
        if c_y.ncols() != p || c_x.ncols() != q {
            return Err(CggmError::input("C_Y and C_X must be square"));
        }
        if c_yx.shape() != (p, q) {
            return Err(CggmError::input(format!(
                "C_YX is {:?}, expected ({p}, {q})",
                c_yx.shape()
            )));
        }
        if !all_finite(&c_y) || !all_finite(&c_yx) || !all_finite(&c_x) {
            return Err(CggmError::input("non-finite entry in sufficient statistics"));
        }
        if max_asymmetry(&c_y) > 1e-12 || max_asymmetry(&c_x) > 1e-12 {
            return Err(CggmError::input("C_Y and C_X must be symmetric"));
        }
        Ok(Self {
            c_y,
            c_yx,
            c_x,
            n,
        })
    }

    pub fn from_dataset(data: &Dataset, center: bool) -> Self {
        sufficient_stats(data, center)
    }

    pub fn p(&self) -> usize {
        self.c_y.nrows()
    }

    pub fn q(&self) -> usize {
        self.c_x.nrows()
    }

    /// Whether `C_X` passes the invertibility test used for initialization and the MLE.
    pub fn c_x_invertible(&self) -> bool {
        is_well_conditioned(&self.c_x, INVERTIBILITY_RATIO)
    }
}

fn centered(a: &Matrix) -> Matrix {
    let n = a.nrows() as f64;
    let mut out = a.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// `C_Y = Y'Y/n`, `C_YX = Y'X/n`, `C_X = X'X/n`, optionally after column centering.
pub fn sufficient_stats(data: &Dataset, center: bool) -> SufficientStats {
    let (y, x) = if center {
        (centered(data.y()), centered(data.x()))
    } else {
        (data.y().clone(), data.x().clone())
    };
    let n = data.n() as f64;
    let c_y = symmetrized(y.tr_mul(&y) / n);
    let c_yx = y.tr_mul(&x) / n;
    let c_x = symmetrized(x.tr_mul(&x) / n);
    SufficientStats {
        c_y,
        c_yx,
        c_x,
        n: data.n(),
    }
}

fn check_gamma(stats: &SufficientStats, gamma: &Matrix) -> Result<()> {
    if gamma.shape() != (stats.p(), stats.q()) {
        return Err(CggmError::input(format!(
            "gamma is {:?}, expected ({}, {})",
            gamma.shape(),
            stats.p(),
            stats.q()
        )));
    }
    Ok(())
}

fn check_theta(stats: &SufficientStats, theta: &Matrix) -> Result<()> {
    if theta.shape() != (stats.p(), stats.p()) {
        return Err(CggmError::input(format!(
            "theta is {:?}, expected ({p}, {p})",
            theta.shape(),
            p = stats.p()
        )));
    }
    Ok(())
}

/// Residual scatter `S_Γ = C_Y − C_YX Γ' − Γ C_YX' + Γ C_X Γ'`.
pub fn residual_scatter(stats: &SufficientStats, gamma: &Matrix) -> Result<Matrix> {
    check_gamma(stats, gamma)?;
    let cross = &stats.c_yx * gamma.transpose();
    let s = &stats.c_y - &cross - cross.transpose() + gamma * &stats.c_x * gamma.transpose();
    Ok(symmetrized(s))
}

/// `−log det Θ + tr(S_Γ Θ)`.
pub fn neg_log_likelihood(stats: &SufficientStats, theta: &Matrix, gamma: &Matrix) -> Result<f64> {
    check_theta(stats, theta)?;
    let s = residual_scatter(stats, gamma)?;
    let log_det = log_det_pd(theta)?;
    Ok(-log_det + trace_product(&s, theta))
}

/// Penalty levels and optional element-wise weights for the two L1 terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    /// Penalty on Γ.
    pub lambda: f64,
    /// Penalty on Θ, diagonal included.
    pub rho: f64,
    pub adaptive: bool,
    /// Exponent of the adaptive weights `|x̃|^{-exponent}`.
    pub exponent: f64,
    pub gamma_weights: Option<Matrix>,
    pub theta_weights: Option<Matrix>,
}

impl PenaltySpec {
    pub const DEFAULT_EXPONENT: f64 = 0.5;

    pub fn lasso(lambda: f64, rho: f64) -> Self {
        Self {
            lambda,
            rho,
            adaptive: false,
            exponent: Self::DEFAULT_EXPONENT,
            gamma_weights: None,
            theta_weights: None,
        }
    }

    pub fn weighted(lambda: f64, rho: f64, gamma_weights: Matrix, theta_weights: Matrix) -> Self {
        Self {
            lambda,
            rho,
            adaptive: true,
            exponent: Self::DEFAULT_EXPONENT,
            gamma_weights: Some(gamma_weights),
            theta_weights: Some(theta_weights),
        }
    }

    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.rho >= 0.0) {
            return Err(CggmError::input("penalties must be nonnegative"));
        }
        if self.adaptive && !(self.exponent > 0.0) {
            return Err(CggmError::input("adaptive exponent must be positive"));
        }
        let check = |w: &Option<Matrix>, shape: (usize, usize), name: &str| -> Result<()> {
            if let Some(w) = w {
                if w.shape() != shape {
                    return Err(CggmError::input(format!(
                        "{name} weights are {:?}, expected {shape:?}",
                        w.shape()
                    )));
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(CggmError::input(format!(
                        "{name} weights must be finite and nonnegative"
                    )));
                }
            }
            Ok(())
        };
        check(&self.gamma_weights, (p, q), "gamma")?;
        check(&self.theta_weights, (p, p), "theta")
    }

    pub fn gamma_weight(&self, i: usize, j: usize) -> f64 {
        self.gamma_weights.as_ref().map_or(1.0, |w| w[(i, j)])
    }

    pub fn theta_weight(&self, i: usize, j: usize) -> f64 {
        self.theta_weights.as_ref().map_or(1.0, |w| w[(i, j)])
    }

    /// `λ Σ w|γ| + ρ Σ w|θ|`. A zero weighted sum contributes zero even when the
    /// level is infinite, so `λ = ∞` with `Γ = 0` stays finite.
    pub fn penalty_value(&self, theta: &Matrix, gamma: &Matrix) -> f64 {
        let weighted_sum = |m: &Matrix, w: &Option<Matrix>| -> f64 {
            match w {
                Some(w) => m.iter().zip(w.iter()).map(|(v, w)| w * v.abs()).sum(),
                None => m.iter().map(|v| v.abs()).sum(),
            }
        };
        let scaled = |level: f64, sum: f64| if sum == 0.0 { 0.0 } else { level * sum };
        scaled(self.lambda, weighted_sum(gamma, &self.gamma_weights))
            + scaled(self.rho, weighted_sum(theta, &self.theta_weights))
    }
}

/// `neg_log_likelihood + λ Σ w|γ| + ρ Σ w|θ|`.
pub fn penalized_objective(
    stats: &SufficientStats,
    theta: &Matrix,
    gamma: &Matrix,
    pen: &PenaltySpec,
) -> Result<f64> {
    Ok(neg_log_likelihood(stats, theta, gamma)? + pen.penalty_value(theta, gamma))
}

/// Unpenalized global minimizer `Γ̃ = C_YX C_X⁻¹`, `Θ̃ = (C_Y − C_YX C_X⁻¹ C_YX')⁻¹`.
pub fn mle_fit(stats: &SufficientStats) -> Result<(Matrix, Matrix)> {
    if stats.n <= stats.p().max(stats.q()) {
        return Err(CggmError::Rank(format!(
            "MLE needs n > max(p, q); got n = {}, p = {}, q = {}",
            stats.n,
            stats.p(),
            stats.q()
        )));
    }
    if !stats.c_x_invertible() {
        return Err(CggmError::Rank("C_X is singular".into()));
    }
    let c_x_inv = inverse_pd(&stats.c_x)?;
    let gamma = &stats.c_yx * c_x_inv;
    let resid = residual_scatter(stats, &gamma)?;
    let theta = inverse_pd(&resid)
        .map_err(|_| CggmError::Rank("residual scatter at the MLE is singular".into()))?;
    Ok((theta, gamma))
}

/// Estimated model returned by the alternating solver.
#[derive(Debug, Clone)]
pub struct CggmFit {
    pub theta: Matrix,
    /// Covariance estimate maintained by the graphical lasso, approximately `Θ⁻¹`.
    pub w: Matrix,
    pub gamma: Matrix,
    pub penalty: PenaltySpec,
    /// Penalized objective after every half-step.
    pub objective_trace: Vec<f64>,
    /// Outer iterations performed.
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl CggmFit {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}
