use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CggmError>;

#[derive(Debug, Error)]
pub enum CggmError {
    /// Malformed or inconsistent caller input.
    #[error("input error: {0}")]
    Input(String),

    /// A value outside the domain of the function, e.g. log det of a non-PD matrix.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be inverted is singular or rank deficient.
    #[error("rank error: {0}")]
    Rank(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative solver ran out of iterations. `last` holds the final iterate.
    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged {
        what: String,
        iterations: usize,
        last: Vec<f64>,
    },

    /// The penalized objective increased between half-steps beyond the allowed slack.
    #[error("objective increased from {before} to {after} at half-step {step}")]
    ObjectiveIncrease { before: f64, after: f64, step: usize },

    #[error("grid search failed: {0}")]
    Search(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CggmError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        CggmError::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CggmError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of an iterative method rather than of the caller's input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            CggmError::NotConverged { .. }
                | CggmError::ObjectiveIncrease { .. }
                | CggmError::Numerical(_)
                | CggmError::Search(_)
        )
    }
}
