//! Estimation and graph-recovery metrics for a precision-matrix estimate.

use serde::{Deserialize, Serialize};

use crate::error::{CggmError, Result};
use crate::linalg::{inverse_pd, Matrix};

/// `tr((Θ⁻¹Θ̂ − I)²)`.
pub fn quadratic_loss(theta_true: &Matrix, theta_hat: &Matrix) -> Result<f64> {
    if theta_true.shape() != theta_hat.shape() {
        return Err(CggmError::input("matrices differ in shape"));
    }
    let inv = inverse_pd(theta_true)
        .map_err(|_| CggmError::Domain("true precision matrix is singular".into()))?;
    let p = theta_true.nrows();
    let d = inv * theta_hat - Matrix::identity(p, p);
    Ok((&d * &d).trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaNorms {
    /// `max |Δ_ij|`
    pub elem_inf: f64,
    /// `max_i Σ_j |Δ_ij|`
    pub mat_inf: f64,
    /// Largest singular value.
    pub spectral: f64,
    pub frobenius: f64,
}

/// Norms of `Δ = Θ − Θ̂`.
pub fn delta_norms(theta_true: &Matrix, theta_hat: &Matrix) -> Result<DeltaNorms> {
    if theta_true.shape() != theta_hat.shape() {
        return Err(CggmError::input("matrices differ in shape"));
    }
    let d = theta_true - theta_hat;
    let elem_inf = d.amax();
    let mat_inf = d
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let frobenius = d.norm();
    Ok(DeltaNorms {
        elem_inf,
        mat_inf,
        spectral: spectral_norm(&d),
        frobenius,
    })
}

/// Largest singular value, `sqrt(λ_max(Δ'Δ))`.
pub fn spectral_norm(d: &Matrix) -> f64 {
    if d.ncols() == 0 {
        return 0.0;
    }
    let eig = nalgebra::SymmetricEigen::new(d.tr_mul(d));
    eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max).sqrt()
}

/// Matthews correlation; 0 when any marginal is empty.
pub fn matthews(tp: usize, tn: usize, fp: usize, fn_: usize) -> f64 {
    let denom = ((tp + fp) as f64 * (tp + fn_) as f64 * (tn + fp) as f64 * (tn + fn_) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub dist: usize,
    pub spe: f64,
    pub sen: f64,
    pub mcc: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    /// True when SPE or SEN had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

/// Support recovery with entries `|x| > tol` counted as nonzero. DIST counts all
/// ordered pairs, the confusion counts use off-diagonal ordered pairs only.
pub fn support_metrics(theta_true: &Matrix, theta_hat: &Matrix, tol: f64) -> Result<SupportMetrics> {
    if theta_true.shape() != theta_hat.shape() {
        return Err(CggmError::input("matrices differ in shape"));
    }
    let t = theta_true.map(|v| v.abs() > tol);
    let h = theta_hat.map(|v| v.abs() > tol);
    Ok(support_metrics_from_masks(&t, &h))
}

pub fn support_metrics_from_masks(
    truth: &nalgebra::DMatrix<bool>,
    est: &nalgebra::DMatrix<bool>,
) -> SupportMetrics {
    let p = truth.nrows();
    let mut dist = 0;
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..p {
        for j in 0..p {
            let a = truth[(i, j)];
            let b = est[(i, j)];
            if a != b {
                dist += 1;
            }
            if i == j {
                continue;
            }
            match (a, b) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let spe = ratio(tn, tn + fp);
    let sen = ratio(tp, tp + fn_);
    let mcc = matthews(tp, tn, fp, fn_);
    SupportMetrics {
        dist,
        spe: spe.unwrap_or(0.0),
        sen: sen.unwrap_or(0.0),
        mcc,
        tp,
        tn,
        fp,
        fn_,
        degenerate: spe.is_none() || sen.is_none(),
    }
}

/// All metrics for one estimate. Graph-only methods leave the estimation fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub loss: Option<f64>,
    pub norm_elem_inf: Option<f64>,
    pub norm_mat_inf: Option<f64>,
    pub norm_spectral: Option<f64>,
    pub norm_frobenius: Option<f64>,
    pub dist: usize,
    pub spe: f64,
    pub sen: f64,
    pub mcc: f64,
    pub degenerate: bool,
}

impl GraphReport {
    pub fn for_estimate(theta_true: &Matrix, theta_hat: &Matrix, tol: f64) -> Result<Self> {
        let loss = quadratic_loss(theta_true, theta_hat)?;
        let norms = delta_norms(theta_true, theta_hat)?;
        let sm = support_metrics(theta_true, theta_hat, tol)?;
        Ok(Self {
            loss: Some(loss),
            norm_elem_inf: Some(norms.elem_inf),
            norm_mat_inf: Some(norms.mat_inf),
            norm_spectral: Some(norms.spectral),
            norm_frobenius: Some(norms.frobenius),
            dist: sm.dist,
            spe: sm.spe,
            sen: sm.sen,
            mcc: sm.mcc,
            degenerate: sm.degenerate,
        })
    }

    /// Support metrics for an adjacency estimate; the diagonal is taken as present.
    pub fn for_graph(theta_true: &Matrix, adjacency: &nalgebra::DMatrix<bool>, tol: f64) -> Self {
        let truth = theta_true.map(|v| v.abs() > tol);
        let mut est = adjacency.clone();
        for i in 0..est.nrows() {
            est[(i, i)] = true;
        }
        let sm = support_metrics_from_masks(&truth, &est);
        Self {
            loss: None,
            norm_elem_inf: None,
            norm_mat_inf: None,
            norm_spectral: None,
            norm_frobenius: None,
            dist: sm.dist,
            spe: sm.spe,
            sen: sm.sen,
            mcc: sm.mcc,
            degenerate: sm.degenerate,
        }
    }
}
