//! Replicated simulation benchmark comparing cGGM against glasso and mLasso.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{gen_dataset, SimConfig, SimModel};
use super::metrics::GraphReport;
use super::mlasso::{mlasso_graph_bic, mlasso_lambda_max};
use crate::error::{CggmError, Result};
use crate::linalg::{inverse_pd, Matrix};
use crate::model::{PenaltySpec, SufficientStats};
use crate::selection::{
    glasso_search, grid_search, lambda_max, log_grid, max_off_diagonal, GridSpec, NONZERO_TOL,
};
use crate::solver::{adaptive_weights, SolveOptions, WEIGHT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cggm,
    Acggm,
    Glasso,
    Aglasso,
    Mlasso,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cggm, Method::Acggm, Method::Glasso, Method::Aglasso, Method::Mlasso];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cggm => "cggm",
            Method::Acggm => "acggm",
            Method::Glasso => "glasso",
            Method::Aglasso => "aglasso",
            Method::Mlasso => "mlasso",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Method::Acggm | Method::Aglasso)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CggmError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CggmError::input(format!("unknown method '{s}'")))
    }
}

/// Tuning grids shared by every method. The mLasso grid uses the λ length and ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrids {
    pub spec: GridSpec,
}

impl Default for BenchGrids {
    fn default() -> Self {
        Self { spec: GridSpec::square(8) }
    }
}

/// One (replication, method) cell. `report` is `None` when the method failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub report: Option<GraphReport>,
    pub error: Option<String>,
}

/// Mean or standard error across the successful replications of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub successes: usize,
    pub mean: MetricValues,
    pub se: MetricValues,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricValues {
    pub loss: Option<f64>,
    pub norm_elem_inf: Option<f64>,
    pub norm_mat_inf: Option<f64>,
    pub norm_spectral: Option<f64>,
    pub norm_frobenius: Option<f64>,
    pub dist: Option<f64>,
    pub spe: Option<f64>,
    pub sen: Option<f64>,
    pub mcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub config: SimConfig,
    pub replications: usize,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchTable {
    pub fn summary_for(&self, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.method == method)
    }
}

struct Tuned {
    lambda: Option<f64>,
    rho: Option<f64>,
    report: GraphReport,
}

fn adaptive_glasso_weights(stats: &SufficientStats, exponent: f64) -> Result<Matrix> {
    if stats.n <= stats.p() {
        return Err(CggmError::Rank("adaptive glasso needs n > p".into()));
    }
    let pilot = inverse_pd(&stats.c_y)?;
    Ok(pilot.map(|v| {
        let w = v.abs().powf(-exponent);
        if w.is_finite() {
            w.min(WEIGHT_CAP)
        } else {
            WEIGHT_CAP
        }
    }))
}

/// Largest off-diagonal `|s_ij| / w_ij`.
fn weighted_off_diagonal_max(s: &Matrix, w: &Matrix) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            if i != j && w[(i, j)] > 0.0 {
                m = m.max(s[(i, j)].abs() / w[(i, j)]);
            }
        }
    }
    m
}

fn run_method(
    method: Method,
    model: &SimModel,
    data: &crate::model::Dataset,
    stats: &SufficientStats,
    grids: &BenchGrids,
    opts: &SolveOptions,
) -> Result<Tuned> {
    let spec = &grids.spec;
    let truth = &model.theta_true;
    if method.is_adaptive() && stats.n <= stats.p().max(stats.q()) {
        return Err(CggmError::Rank("adaptive methods need n > max(p, q)".into()));
    }
    match method {
        Method::Cggm | Method::Acggm => {
            let adaptive = method == Method::Acggm;
            let (lg, rg) = if adaptive {
                let (gw, tw) = adaptive_weights(stats, PenaltySpec::DEFAULT_EXPONENT)?;
                let diag = Matrix::from_diagonal(&stats.c_y.diagonal().map(|v| 1.0 / v.max(f64::MIN_POSITIVE)));
                let lmax = lambda_max(stats, &diag, Some(&gw)).max(f64::MIN_POSITIVE);
                let s0 = crate::model::residual_scatter(stats, &crate::model::mle_fit(stats)?.1)?;
                let rmax = weighted_off_diagonal_max(&s0, &tw).max(f64::MIN_POSITIVE);
                (
                    log_grid(lmax, spec.lambda_ratio, spec.lambda_len),
                    log_grid(rmax, spec.rho_ratio, spec.rho_len),
                )
            } else {
                spec.build(stats, None)
            };
            let search = grid_search(stats, &lg, &rg, adaptive, opts)?;
            Ok(Tuned {
                lambda: Some(search.best.penalty.lambda),
                rho: Some(search.best.penalty.rho),
                report: GraphReport::for_estimate(truth, &search.best.theta, NONZERO_TOL)?,
            })
        }
        Method::Glasso | Method::Aglasso => {
            let weights = if method == Method::Aglasso {
                Some(adaptive_glasso_weights(stats, PenaltySpec::DEFAULT_EXPONENT)?)
            } else {
                None
            };
            let rmax = match &weights {
                Some(w) => weighted_off_diagonal_max(&stats.c_y, w),
                None => max_off_diagonal(&stats.c_y),
            }
            .max(f64::MIN_POSITIVE);
            let rg = log_grid(rmax, spec.rho_ratio, spec.rho_len);
            let search = glasso_search(stats, &rg, weights.as_ref(), opts)?;
            Ok(Tuned {
                lambda: None,
                rho: Some(search.best_rho),
                report: GraphReport::for_estimate(truth, &search.best.theta, NONZERO_TOL)?,
            })
        }
        Method::Mlasso => {
            let lmax = mlasso_lambda_max(data).max(f64::MIN_POSITIVE);
            let lg = log_grid(lmax, spec.lambda_ratio, spec.lambda_len);
            let g = mlasso_graph_bic(data, &lg, NONZERO_TOL)?;
            Ok(Tuned {
                lambda: None,
                rho: None,
                report: GraphReport::for_graph(truth, &g.adjacency, NONZERO_TOL),
            })
        }
    }
}

fn replication_rows(
    config: &SimConfig,
    r: usize,
    methods: &[Method],
    grids: &BenchGrids,
    opts: &SolveOptions,
) -> Vec<BenchRow> {
    let seed = config.seed.wrapping_add(r as u64);
    let rep_config = SimConfig { seed, ..config.clone() };
    let fail_all = |e: CggmError| {
        methods
            .iter()
            .map(|&method| BenchRow {
                replication: r,
                seed,
                method,
                lambda: None,
                rho: None,
                report: None,
                error: Some(e.to_string()),
            })
            .collect::<Vec<_>>()
    };
    let model = match SimModel::generate(&rep_config) {
        Ok(m) => m,
        Err(e) => return fail_all(e),
    };
    let data = match gen_dataset(&model, config.n, seed) {
        Ok(d) => d,
        Err(e) => return fail_all(e),
    };
    let stats = SufficientStats::from_dataset(&data, opts.center);
    methods
        .iter()
        .map(|&method| match run_method(method, &model, &data, &stats, grids, opts) {
            Ok(t) => BenchRow {
                replication: r,
                seed,
                method,
                lambda: t.lambda,
                rho: t.rho,
                report: Some(t.report),
                error: None,
            },
            Err(e) => BenchRow {
                replication: r,
                seed,
                method,
                lambda: None,
                rho: None,
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (Some(mean), Some((var / k as f64).sqrt()))
}

fn summarize(method: Method, rows: &[BenchRow]) -> SummaryRow {
    let reports: Vec<&GraphReport> = rows
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.report.as_ref())
        .collect();
    let field = |get: &dyn Fn(&GraphReport) -> Option<f64>| {
        let vals: Vec<f64> = reports.iter().filter_map(|r| get(r)).collect();
        mean_se(&vals)
    };
    let mut mean = MetricValues::default();
    let mut se = MetricValues::default();
    macro_rules! fill {
        ($name:ident, $get:expr) => {{
            let (m, s) = field(&$get);
            mean.$name = m;
            se.$name = s;
        }};
    }
    fill!(loss, |r: &GraphReport| r.loss);
    fill!(norm_elem_inf, |r: &GraphReport| r.norm_elem_inf);
    fill!(norm_mat_inf, |r: &GraphReport| r.norm_mat_inf);
    fill!(norm_spectral, |r: &GraphReport| r.norm_spectral);
    fill!(norm_frobenius, |r: &GraphReport| r.norm_frobenius);
    fill!(dist, |r: &GraphReport| Some(r.dist as f64));
    fill!(spe, |r: &GraphReport| Some(r.spe));
    fill!(sen, |r: &GraphReport| Some(r.sen));
    fill!(mcc, |r: &GraphReport| Some(r.mcc));
    SummaryRow {
        method,
        successes: reports.len(),
        mean,
        se,
    }
}

/// Run `replications` independent replications of `config`.
///
/// Replication `r` uses seed `config.seed + r` for its model and data. Each
/// method is tuned by BIC on its own grid. Failed cells are recorded and the
/// run continues. Replications run in parallel; the table does not depend on
/// scheduling.
pub fn run_benchmark(
    config: &SimConfig,
    replications: usize,
    methods: &[Method],
    grids: &BenchGrids,
    opts: &SolveOptions,
) -> Result<BenchTable> {
    config.validate()?;
    if replications == 0 {
        return Err(CggmError::input("replications must be at least one"));
    }
    if methods.is_empty() {
        return Err(CggmError::input("at least one method is required"));
    }
    let spec = &grids.spec;
    if spec.lambda_len == 0 || spec.rho_len == 0 || !(spec.lambda_ratio > 0.0 && spec.rho_ratio > 0.0) {
        return Err(CggmError::input("grid lengths and ratios must be positive"));
    }
    let rows: Vec<BenchRow> = (0..replications)
        .into_par_iter()
        .map(|r| replication_rows(config, r, methods, grids, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let summary = methods.iter().map(|&m| summarize(m, &rows)).collect();
    Ok(BenchTable {
        config: config.clone(),
        replications,
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            p: 6,
            q: 3,
            n: 120,
            theta_link_prob: 0.35,
            gamma_link_prob: 0.4,
            seed: 11,
            symmetrization: Default::default(),
        }
    }

    fn grids() -> BenchGrids {
        BenchGrids {
            spec: GridSpec {
                lambda_len: 4,
                rho_len: 4,
                lambda_ratio: 0.1,
                rho_ratio: 0.1,
            },
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, s) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[]), (None, None));
        assert_eq!(mean_se(&[4.0]), (Some(4.0), None));
    }

    #[test]
    fn rows_cover_every_replication_and_method() {
        let t = run_benchmark(&small(), 2, &Method::ALL, &grids(), &SolveOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 10);
        for (k, row) in t.rows.iter().enumerate() {
            assert_eq!(row.replication, k / 5);
            assert_eq!(row.method, Method::ALL[k % 5]);
            assert_eq!(row.seed, 11 + (k / 5) as u64);
            assert!(row.report.is_some(), "{:?}", row.error);
        }
        assert_eq!(t.summary.len(), 5);
        assert!(t.summary.iter().all(|s| s.successes == 2));
        assert!(t.summary_for(Method::Mlasso).unwrap().mean.loss.is_none());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = run_benchmark(&small(), 1, &[Method::Cggm, Method::Glasso], &grids(), &SolveOptions::default()).unwrap();
        let b = run_benchmark(&small(), 1, &[Method::Cggm, Method::Glasso], &grids(), &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adaptive_methods_fail_softly_when_underdetermined() {
        let cfg = SimConfig { n: 5, ..small() };
        let t = run_benchmark(&cfg, 1, &[Method::Acggm, Method::Cggm], &grids(), &SolveOptions::default()).unwrap();
        assert!(t.rows[0].report.is_none());
        assert!(t.rows[0].error.as_deref().unwrap().contains("n > max"));
        assert_eq!(t.summary[0].successes, 0);
    }

    #[test]
    fn rejects_empty_requests() {
        let o = SolveOptions::default();
        assert!(run_benchmark(&small(), 0, &Method::ALL, &grids(), &o).is_err());
        assert!(run_benchmark(&small(), 1, &[], &grids(), &o).is_err());
    }
}
