//! Sparse conditional Gaussian graphical models.
//!
//! Given expression data `Y` (n×p) and marker data `X` (n×q), the model is
//! `y | x ~ N(Γx, Θ⁻¹)`. [`solver::fit`] minimizes the L1-penalized negative
//! log-likelihood jointly over the regression matrix Γ and the precision
//! matrix Θ, alternating a graphical-lasso step for Θ with coordinate descent
//! for Γ. [`selection`] tunes the two penalty levels by BIC and [`sim`] holds
//! the simulation models, metrics and baselines used to benchmark the method.

pub mod error;
pub mod glasso;
pub mod io;
pub mod lasso;
pub mod linalg;
pub mod model;
pub mod selection;
pub mod sim;
pub mod solver;

pub use error::{CggmError, Result};
pub use glasso::{glasso, GlassoOptions, GlassoResult};
pub use lasso::{lasso_regression, soft_threshold, solve_quad_lasso, QuadLassoProblem};
pub use linalg::{Matrix, Vector};
pub use model::{
    mle_fit, neg_log_likelihood, penalized_objective, residual_scatter, sufficient_stats, CggmFit, Dataset,
    PenaltySpec, SufficientStats,
};
pub use selection::{bic, glasso_search, grid_search, BicRecord, GridSearch, GridSpec};
pub use solver::{adaptive_weights, fit, fit_adaptive, fit_from, init, update_gamma, SolveOptions};
