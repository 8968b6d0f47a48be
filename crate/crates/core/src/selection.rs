//! BIC and the (λ, ρ) grid search used to pick tuning parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CggmError, Result};
use crate::glasso::{glasso, GlassoResult};
use crate::linalg::{count_nonzero, count_nonzero_off_diagonal, log_det_pd, trace_product, Matrix};
use crate::model::{residual_scatter, CggmFit, PenaltySpec, SufficientStats};
use crate::solver::{adaptive_weights, fit_from, init, SolveOptions};

/// Entries with magnitude at or below this count as zero in `s_n` and `k_n`.
pub const NONZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicRecord {
    pub lambda: f64,
    pub rho: f64,
    pub bic: f64,
    /// Nonzero off-diagonal entries of Θ̂, both orders.
    pub s_n: usize,
    /// Nonzero entries of Γ̂.
    pub k_n: usize,
    pub converged: bool,
}

/// `−n log|Θ| + n tr(Θ S_Γ) + log(n)(s_n/2 + p + k_n)` with its support counts.
pub fn bic_parts(stats: &SufficientStats, theta: &Matrix, gamma: &Matrix) -> Result<(f64, usize, usize)> {
    let n = stats.n as f64;
    let s = residual_scatter(stats, gamma)?;
    let log_det = log_det_pd(theta)?;
    let s_n = count_nonzero_off_diagonal(theta, NONZERO_TOL);
    let k_n = count_nonzero(gamma, NONZERO_TOL);
    let df = s_n as f64 / 2.0 + stats.p() as f64 + k_n as f64;
    Ok((-n * log_det + n * trace_product(theta, &s) + n.ln() * df, s_n, k_n))
}

pub fn bic(fit: &CggmFit, stats: &SufficientStats) -> Result<f64> {
    bic_parts(stats, &fit.theta, &fit.gamma).map(|(b, _, _)| b)
}

/// Smallest λ at which Γ = 0 is optimal for the given Θ:
/// `max |2(ΘC_YX)_ij| / w_ij`.
pub fn lambda_max(stats: &SufficientStats, theta: &Matrix, gamma_weights: Option<&Matrix>) -> f64 {
    let g = theta * &stats.c_yx * 2.0;
    let mut best = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let w = gamma_weights.map_or(1.0, |w| w[(i, j)]);
            if w > 0.0 {
                best = best.max(g[(i, j)].abs() / w);
            }
        }
    }
    best
}

/// Largest off-diagonal magnitude of the starting residual scatter `S_Γ₀`.
pub fn rho_max(stats: &SufficientStats) -> f64 {
    let (gamma0, _) = init(stats, 0.0);
    let s = residual_scatter(stats, &gamma0).expect("conforming by construction");
    max_off_diagonal(&s)
}

pub fn max_off_diagonal(s: &Matrix) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            if i != j {
                best = best.max(s[(i, j)].abs());
            }
        }
    }
    best
}

/// `len` log-spaced values from `max` down to `max * ratio`.
pub fn log_grid(max: f64, ratio: f64, len: usize) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![max],
        _ => (0..len)
            .map(|k| max * ratio.powf(k as f64 / (len - 1) as f64))
            .collect(),
    }
}

/// Default grid construction: `λ_max` from the Γ = 0 gradient with
/// `Θ = diag(1/C_Y)`, `ρ_max` from [`rho_max`], both spanning `ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambda_len: usize,
    pub rho_len: usize,
    pub lambda_ratio: f64,
    pub rho_ratio: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda_len: 10,
            rho_len: 10,
            lambda_ratio: 0.05,
            rho_ratio: 0.05,
        }
    }
}

impl GridSpec {
    pub fn square(len: usize) -> Self {
        Self {
            lambda_len: len,
            rho_len: len,
            ..Self::default()
        }
    }

    pub fn build(&self, stats: &SufficientStats, gamma_weights: Option<&Matrix>) -> (Vec<f64>, Vec<f64>) {
        let diag = Matrix::from_diagonal(&stats.c_y.diagonal().map(|v| if v > 0.0 { 1.0 / v } else { 0.0 }));
        let lmax = lambda_max(stats, &diag, gamma_weights).max(f64::MIN_POSITIVE);
        let rmax = rho_max(stats).max(f64::MIN_POSITIVE);
        (
            log_grid(lmax, self.lambda_ratio, self.lambda_len),
            log_grid(rmax, self.rho_ratio, self.rho_len),
        )
    }
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best: CggmFit,
    pub best_index: usize,
    /// One record per (λ, ρ) cell in λ-major grid order.
    pub table: Vec<BicRecord>,
}

/// Index of the cell to select: smallest BIC among converged cells, ties going to
/// the larger `λ + ρ` and then to the earlier cell.
pub fn select_best(table: &[BicRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, rec) in table.iter().enumerate() {
        if !rec.converged || !rec.bic.is_finite() {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let cur = &table[b];
                if rec.bic < cur.bic || (rec.bic == cur.bic && rec.lambda + rec.rho > cur.lambda + cur.rho) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn sorted_desc(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Fit every (λ, ρ) cell and select by BIC.
///
/// Each ρ row is solved in order of decreasing λ with warm starts; rows run in
/// parallel on the current rayon pool and are reassembled by grid index.
pub fn grid_search(
    stats: &SufficientStats,
    lambda_grid: &[f64],
    rho_grid: &[f64],
    adaptive: bool,
    opts: &SolveOptions,
) -> Result<GridSearch> {
    if lambda_grid.is_empty() || rho_grid.is_empty() {
        return Err(CggmError::input("grids must be nonempty"));
    }
    if lambda_grid.iter().chain(rho_grid).any(|v| !(*v > 0.0)) {
        return Err(CggmError::input("grid values must be positive"));
    }
    let weights = if adaptive {
        Some(adaptive_weights(stats, PenaltySpec::DEFAULT_EXPONENT)?)
    } else {
        None
    };
    let make_pen = |lambda: f64, rho: f64| match &weights {
        Some((gw, tw)) => PenaltySpec::weighted(lambda, rho, gw.clone(), tw.clone()),
        None => PenaltySpec::lasso(lambda, rho),
    };

    let nl = lambda_grid.len();
    let lambda_order = sorted_desc(lambda_grid);
    let rows: Vec<Vec<(usize, Option<CggmFit>, BicRecord)>> = rho_grid
        .par_iter()
        .enumerate()
        .map(|(ri, &rho)| {
            let mut out = Vec::with_capacity(nl);
            let mut warm: Option<CggmFit> = None;
            for &li in &lambda_order {
                let lambda = lambda_grid[li];
                let pen = make_pen(lambda, rho);
                let cell = li * rho_grid.len() + ri;
                match fit_from(stats, &pen, opts, warm.as_ref()) {
                    Ok(f) => {
                        let rec = match bic_parts(stats, &f.theta, &f.gamma) {
                            Ok((b, s_n, k_n)) => BicRecord { lambda, rho, bic: b, s_n, k_n, converged: f.converged },
                            Err(_) => BicRecord { lambda, rho, bic: f64::NAN, s_n: 0, k_n: 0, converged: false },
                        };
                        warm = Some(f.clone());
                        out.push((cell, Some(f), rec));
                    }
                    Err(_) => {
                        warm = None;
                        out.push((cell, None, BicRecord { lambda, rho, bic: f64::NAN, s_n: 0, k_n: 0, converged: false }));
                    }
                }
            }
            out
        })
        .collect();

    let mut cells: Vec<(usize, Option<CggmFit>, BicRecord)> = rows.into_iter().flatten().collect();
    cells.sort_by_key(|c| c.0);
    let table: Vec<BicRecord> = cells.iter().map(|c| c.2.clone()).collect();
    let best_index = select_best(&table)
        .ok_or_else(|| CggmError::Search("no grid cell produced a converged fit".into()))?;
    let best = cells[best_index].1.take().expect("selected cells have a fit");
    Ok(GridSearch { best, best_index, table })
}

/// Graphical-lasso baseline on `C_Y` (Γ fixed at zero) tuned by the same BIC.
#[derive(Debug, Clone)]
pub struct GlassoSearch {
    pub best: GlassoResult,
    pub best_rho: f64,
    pub table: Vec<BicRecord>,
}

pub fn glasso_search(
    stats: &SufficientStats,
    rho_grid: &[f64],
    theta_weights: Option<&Matrix>,
    opts: &SolveOptions,
) -> Result<GlassoSearch> {
    if rho_grid.is_empty() || rho_grid.iter().any(|v| !(*v > 0.0)) {
        return Err(CggmError::input("rho grid must be nonempty and positive"));
    }
    let zero = Matrix::zeros(stats.p(), stats.q());
    let mut fits: Vec<Option<GlassoResult>> = vec![None; rho_grid.len()];
    let mut table = vec![
        BicRecord { lambda: f64::INFINITY, rho: 0.0, bic: f64::NAN, s_n: 0, k_n: 0, converged: false };
        rho_grid.len()
    ];
    for ri in sorted_desc(rho_grid) {
        let rho = rho_grid[ri];
        table[ri].rho = rho;
        if let Ok(g) = glasso(&stats.c_y, rho, theta_weights, None, &opts.glasso) {
            if let Ok((b, s_n, k_n)) = bic_parts(stats, &g.theta, &zero) {
                table[ri] = BicRecord { lambda: f64::INFINITY, rho, bic: b, s_n, k_n, converged: g.converged };
            }
            fits[ri] = Some(g);
        }
    }
    let best_index = select_best(&table)
        .ok_or_else(|| CggmError::Search("no glasso cell converged".into()))?;
    Ok(GlassoSearch {
        best: fits[best_index].take().expect("selected cells have a fit"),
        best_rho: rho_grid[best_index],
        table,
    })
}
