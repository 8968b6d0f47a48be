//! Synthetic sparse models and data.
//!
//! Every generator draws from a ChaCha8 stream seeded with `seed` and a fixed
//! stream id, so the three pieces of one replication never share random numbers:
//! stream 0 builds Θ, stream 1 builds Γ, stream 2 draws the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CggmError, Result};
use crate::linalg::{cholesky_factor, Matrix, Vector};
use crate::model::Dataset;

const THETA_STREAM: u64 = 0;
const GAMMA_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub theta_link_prob: f64,
    pub gamma_link_prob: f64,
    pub seed: u64,
    #[serde(default)]
    pub symmetrization: Symmetrization,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.n == 0 {
            return Err(CggmError::input("p, q and n must be at least one"));
        }
        for (name, v) in [("theta", self.theta_link_prob), ("gamma", self.gamma_link_prob)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CggmError::input(format!("{name} link probability must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    /// Model 1: (p, q, n) = (100, 100, 250), pr(θ ≠ 0) = 2/p, pr(γ ≠ 0) = 3/q.
    pub fn model1(seed: u64) -> Self {
        Self::scaled(100, 100, 250, 2.0, 3.0, seed)
    }

    /// Model 2: (50, 50, 250), 2/p and 4/q.
    pub fn model2(seed: u64) -> Self {
        Self::scaled(50, 50, 250, 2.0, 4.0, seed)
    }

    /// Model 3: (25, 10, 250), 2/p and 3.5/q.
    pub fn model3(seed: u64) -> Self {
        Self::scaled(25, 10, 250, 2.0, 3.5, seed)
    }

    /// Model 4: (1000, 200, 250), 1.5/p and 20/q.
    pub fn model4(seed: u64) -> Self {
        Self::scaled(1000, 200, 250, 1.5, 20.0, seed)
    }

    /// Model 5: (800, 200, 250), 1.5/p and 25/q.
    pub fn model5(seed: u64) -> Self {
        Self::scaled(800, 200, 250, 1.5, 25.0, seed)
    }

    /// Model 6: (400, 200, 150), 2.5/p and 20/q.
    pub fn model6(seed: u64) -> Self {
        Self::scaled(400, 200, 150, 2.5, 20.0, seed)
    }

    /// Numbered preset, `1..=6`.
    pub fn preset(model: u32, seed: u64) -> Result<Self> {
        Ok(match model {
            1 => Self::model1(seed),
            2 => Self::model2(seed),
            3 => Self::model3(seed),
            4 => Self::model4(seed),
            5 => Self::model5(seed),
            6 => Self::model6(seed),
            _ => return Err(CggmError::input(format!("unknown model {model}, expected 1 to 6"))),
        })
    }

    fn scaled(p: usize, q: usize, n: usize, theta_c: f64, gamma_c: f64, seed: u64) -> Self {
        Self {
            p,
            q,
            n,
            theta_link_prob: theta_c / p as f64,
            gamma_link_prob: gamma_c / q as f64,
            seed,
            symmetrization: Symmetrization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub theta_true: Matrix,
    pub gamma_true: Matrix,
    pub config: SimConfig,
}

impl SimModel {
    /// Θ and Γ for `config`, seeded from `config.seed`.
    pub fn generate(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let theta_true = gen_precision_with(config.p, config.theta_link_prob, config.seed, config.symmetrization);
        let v_min = min_abs_off_diagonal(&theta_true).unwrap_or(0.5);
        let gamma_true = gen_gamma(config.p, config.q, config.gamma_link_prob, v_min, config.seed)?;
        Ok(Self {
            theta_true,
            gamma_true,
            config: config.clone(),
        })
    }
}

/// Smallest nonzero off-diagonal magnitude, `None` for a diagonal matrix.
pub fn min_abs_off_diagonal(a: &Matrix) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)].abs();
            if i != j && v > 0.0 {
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
    }
    best
}

fn signed_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let mag = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Link indicators for the upper triangle, entries from `Unif([−1, −0.5] ∪ [0.5, 1])`.
pub fn raw_links(p: usize, link_prob: f64, seed: u64) -> Matrix {
    let mut rng = rng_for(seed, THETA_STREAM);
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(link_prob) {
                let v = signed_uniform(&mut rng, 0.5, 1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    a
}

/// How the row-normalized link matrix is made symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetrization {
    /// Keep the smaller-magnitude entry of each pair, i.e. divide the raw value by
    /// 1.5 times the larger of the two row sums. Every row's absolute off-diagonal
    /// sum stays at most 2/3.
    #[default]
    MinMagnitude,
    /// `(A + A') / 2`. Usually positive definite but rows can exceed the 2/3 bound.
    Average,
}

/// Apply the normalisation recipe to a symmetric matrix of raw link values: each
/// row's off-diagonals are divided by 1.5 times their absolute sum (rows without
/// links are left alone), the result is symmetrized and the diagonal set to 1.
pub fn normalize_links(raw: &Matrix, sym: Symmetrization) -> Matrix {
    let p = raw.nrows();
    let mut a = raw.clone();
    for i in 0..p {
        let row_sum: f64 = (0..p).filter(|&j| j != i).map(|j| raw[(i, j)].abs()).sum();
        if row_sum > 0.0 {
            for j in 0..p {
                if j != i {
                    a[(i, j)] = raw[(i, j)] / (1.5 * row_sum);
                }
            }
        }
    }
    let mut out = match sym {
        Symmetrization::Average => (&a + a.transpose()) * 0.5,
        Symmetrization::MinMagnitude => Matrix::from_fn(p, p, |i, j| {
            let (x, y) = (a[(i, j)], a[(j, i)]);
            if x.abs() <= y.abs() {
                x
            } else {
                y
            }
        }),
    };
    for i in 0..p {
        out[(i, i)] = 1.0;
    }
    out
}

/// Sparse precision matrix with unit diagonal and rows of absolute off-diagonal
/// sum at most 2/3.
pub fn gen_precision(p: usize, link_prob: f64, seed: u64) -> Matrix {
    gen_precision_with(p, link_prob, seed, Symmetrization::default())
}

pub fn gen_precision_with(p: usize, link_prob: f64, seed: u64, sym: Symmetrization) -> Matrix {
    normalize_links(&raw_links(p, link_prob, seed), sym)
}

/// Sparse coefficient matrix with nonzeros from `Unif([v_min, 1] ∪ [−1, −v_min])`.
pub fn gen_gamma(p: usize, q: usize, link_prob: f64, v_min: f64, seed: u64) -> Result<Matrix> {
    if !(v_min > 0.0 && v_min <= 1.0) {
        return Err(CggmError::input("v_min must lie in (0, 1]"));
    }
    let mut rng = rng_for(seed, GAMMA_STREAM);
    let mut g = Matrix::zeros(p, q);
    for i in 0..p {
        for j in 0..q {
            if rng.random_bool(link_prob) {
                g[(i, j)] = signed_uniform(&mut rng, v_min, 1.0);
            }
        }
    }
    Ok(g)
}

/// `n` samples: markers iid Bernoulli(½), `y = Γx + ε` with `ε ~ N(0, Θ⁻¹)`.
///
/// With `Θ = LL'`, `ε = L'⁻¹z` for standard normal `z`.
pub fn gen_dataset(model: &SimModel, n: usize, seed: u64) -> Result<Dataset> {
    let p = model.theta_true.nrows();
    let q = model.gamma_true.ncols();
    let l = cholesky_factor(&model.theta_true)
        .ok_or_else(|| CggmError::input("theta_true is not positive definite"))?;
    let lt = l.transpose();
    let mut rng = rng_for(seed, DATA_STREAM);
    let x = Matrix::from_fn(n, q, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let mut y = Matrix::zeros(n, p);
    for r in 0..n {
        let z = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eps = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| CggmError::Numerical("triangular solve failed".into()))?;
        let mean = &model.gamma_true * x.row(r).transpose();
        for c in 0..p {
            y[(r, c)] = mean[c] + eps[c];
        }
    }
    Dataset::new(y, x)
}
