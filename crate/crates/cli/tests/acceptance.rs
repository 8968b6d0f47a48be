//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line each and exits nonzero if any criterion fails.

use std::process::Command;
use std::time::Instant;

use cggm::glasso::{glasso, subgradient_violation, GlassoOptions};
use cggm::selection::{lambda_max, GridSpec, NONZERO_TOL};
use cggm::sim::{
    delta_norms, gen_dataset, gen_precision, matthews, quadratic_loss, run_benchmark, BenchGrids, Method,
    SimConfig, SimModel,
};
use cggm::solver::gamma_kkt_violation;
use cggm::{bic, fit, residual_scatter, CggmFit, Matrix, PenaltySpec, SolveOptions, SufficientStats};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn instance(p: usize, q: usize, n: usize, theta_prob: f64, gamma_prob: f64, seed: u64) -> SufficientStats {
    let cfg = SimConfig {
        p,
        q,
        n,
        theta_link_prob: theta_prob,
        gamma_link_prob: gamma_prob,
        seed,
        symmetrization: Default::default(),
    };
    let model = SimModel::generate(&cfg).expect("valid config");
    SufficientStats::from_dataset(&gen_dataset(&model, n, seed).expect("valid model"), true)
}

fn tight() -> SolveOptions {
    SolveOptions {
        tol_outer: 1e-12,
        tol_inner: 1e-12,
        kkt_tol: 1e-9,
        max_outer: 1000,
        glasso: GlassoOptions {
            tol: 1e-12,
            max_sweeps: 10_000,
            lasso_tol: 1e-13,
            lasso_max_iter: 100_000,
            trace: false,
        },
        ..SolveOptions::default()
    }
}

/// Objective traces collected from every fit the suite runs.
#[derive(Default)]
struct Traces(Vec<Vec<f64>>);

impl Traces {
    fn add(&mut self, f: &CggmFit) {
        self.0.push(f.objective_trace.clone());
    }
}

// ---------------------------------------------------------------- 1 and 2

fn benchmark_means(cfg: &SimConfig, reps: usize) -> Result<(f64, f64, f64, f64, f64, f64), String> {
    let grids = BenchGrids { spec: GridSpec::square(8) };
    let table = run_benchmark(cfg, reps, &[Method::Cggm, Method::Glasso], &grids, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let c = table.summary_for(Method::Cggm).unwrap();
    let g = table.summary_for(Method::Glasso).unwrap();
    if c.successes != reps || g.successes != reps {
        return Err(format!("failed cells: cggm {}/{reps}, glasso {}/{reps}", c.successes, g.successes));
    }
    Ok((
        c.mean.loss.unwrap(),
        g.mean.loss.unwrap(),
        c.mean.mcc.unwrap(),
        g.mean.mcc.unwrap(),
        c.mean.norm_frobenius.unwrap(),
        g.mean.norm_frobenius.unwrap(),
    ))
}

fn model3_reproduction() -> Outcome {
    let (lc, lg, mc, mg, _, _) = benchmark_means(&SimConfig::model3(7), 20)?;
    check(
        lc < lg && (0.8..=3.0).contains(&lc) && mc - mg >= 0.2,
        format!("mean LOSS cGGM {lc:.3} vs glasso {lg:.3}; mean MCC cGGM {mc:.3} vs glasso {mg:.3} (gap {:.3})", mc - mg),
    )
}

fn model2_ordering() -> Outcome {
    let (_, _, _, _, fc, fg) = benchmark_means(&SimConfig::model2(7), 10)?;
    check(
        fc < fg && (1.5..=3.5).contains(&fc),
        format!("mean Frobenius cGGM {fc:.3} vs glasso {fg:.3}"),
    )
}

// ---------------------------------------------------------------- 3

/// The penalized objective evaluated from scratch on small dense matrices.
struct Objective {
    c_y: DMatrix<f64>,
    c_yx: DMatrix<f64>,
    c_x: DMatrix<f64>,
    lambda: f64,
    rho: f64,
}

impl Objective {
    fn p(&self) -> usize {
        self.c_y.nrows()
    }

    fn q(&self) -> usize {
        self.c_x.nrows()
    }

    fn pack(&self, theta: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Vec<f64> {
        let p = self.p();
        let mut x: Vec<f64> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).map(|(i, j)| theta[(i, j)]).collect();
        x.extend((0..p).flat_map(|i| (0..self.q()).map(move |k| (i, k))).map(|(i, k)| gamma[(i, k)]));
        x
    }

    fn unpack(&self, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let (p, q) = (self.p(), self.q());
        let mut theta = DMatrix::zeros(p, p);
        let mut k = 0;
        for i in 0..p {
            for j in i..p {
                theta[(i, j)] = x[k];
                theta[(j, i)] = x[k];
                k += 1;
            }
        }
        let gamma = DMatrix::from_row_slice(p, q, &x[k..]);
        (theta, gamma)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (theta, gamma) = self.unpack(x);
        let Some(chol) = theta.clone().cholesky() else {
            return f64::INFINITY;
        };
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let s = &self.c_y - &self.c_yx * gamma.transpose() - &gamma * self.c_yx.transpose()
            + &gamma * &self.c_x * gamma.transpose();
        let tr = (&s * &theta).trace();
        -log_det + tr + self.rho * theta.abs().sum() + self.lambda * gamma.abs().sum()
    }
}

fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 * (1.0 + a.abs()) {
        if fc <= fd {
            (b, d, fd) = (d, c, fc);
            c = b - r * (b - a);
            fc = f(c);
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    if a <= 0.0 && 0.0 <= b && f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

/// Coordinate-wise golden-section descent.
fn polish(obj: &Objective, mut x: Vec<f64>) -> f64 {
    let mut fx = obj.value(&x);
    for _ in 0..3000 {
        let before = fx;
        for k in 0..x.len() {
            let f = |t: f64| {
                let mut y = x.clone();
                y[k] = t;
                obj.value(&y)
            };
            let mut h = 1e-3 + 0.1 * x[k].abs();
            while (f(x[k] - h) < fx || f(x[k] + h) < fx) && h < 1e6 {
                h *= 2.0;
            }
            let t = golden(&f, x[k] - h, x[k] + h);
            let ft = f(t);
            if ft < fx {
                x[k] = t;
                fx = ft;
            }
        }
        if before - fx <= 1e-15 * (1.0 + fx.abs()) {
            break;
        }
    }
    fx
}

/// Best value over `probes` random points around the unpenalized estimate (with
/// random sparsification), then polished from the five best points.
fn brute_force_minimum(obj: &Objective, probes: usize, rng: &mut ChaCha8Rng) -> f64 {
    let gamma_ls = &obj.c_yx * obj.c_x.clone().try_inverse().expect("markers vary");
    let resid = &obj.c_y - &gamma_ls * obj.c_yx.transpose();
    let theta_ls = resid.try_inverse().expect("residual covariance is invertible");
    let (p, q) = (obj.p(), obj.q());
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    let consider = |x: Vec<f64>, v: f64, best: &mut Vec<(f64, Vec<f64>)>| {
        if v.is_finite() {
            best.push((v, x));
            if best.len() > 64 {
                best.sort_by(|a, b| a.0.total_cmp(&b.0));
                best.truncate(5);
            }
        }
    };
    for _ in 0..probes {
        let scale = [0.02, 0.1, 0.3, 0.8][rng.random_range(0..4)];
        let keep = rng.random_range(0.0..1.0);
        let shrink = rng.random_range(0.0..1.0);
        let mut theta = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let base = theta_ls[(i, j)] * if i == j { 1.0 } else { shrink };
                let mut v = base + scale * rng.random_range(-1.0..1.0) * theta_ls[(i, i)].max(theta_ls[(j, j)]);
                if i != j && rng.random_range(0.0..1.0) > keep {
                    v = 0.0;
                }
                theta[(i, j)] = v;
                theta[(j, i)] = v;
            }
        }
        let mut gamma = DMatrix::zeros(p, q);
        for i in 0..p {
            for k in 0..q {
                let g = gamma_ls[(i, k)] * shrink + scale * rng.random_range(-1.0..1.0) * (gamma_ls[(i, k)].abs() + 0.1);
                gamma[(i, k)] = if rng.random_range(0.0..1.0) > keep { 0.0 } else { g };
            }
        }
        let x = obj.pack(&theta, &gamma);
        let v = obj.value(&x);
        consider(x, v, &mut best);
    }
    best.sort_by(|a, b| a.0.total_cmp(&b.0));
    best.truncate(5);
    best.into_iter().map(|(_, x)| polish(obj, x)).fold(f64::INFINITY, f64::min)
}

fn oracle_equivalence(traces: &mut Traces) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap = 0.0_f64;
    let mut worst_above = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for k in 0..50u64 {
        let p = 2 + (k % 2) as usize;
        let q = 1 + ((k / 2) % 2) as usize;
        let stats = instance(p, q, 200, 0.6, 0.6, 500 + k);
        let (lambda, rho) = (rng.random_range(0.02..0.5), rng.random_range(0.02..0.4));
        let f = fit(&stats, &PenaltySpec::lasso(lambda, rho), &tight()).map_err(|e| format!("instance {k}: {e}"))?;
        traces.add(&f);
        let obj = Objective {
            c_y: stats.c_y.clone(),
            c_yx: stats.c_yx.clone(),
            c_x: stats.c_x.clone(),
            lambda,
            rho,
        };
        let fit_value = obj.value(&obj.pack(&f.theta, &f.gamma));
        let brute = brute_force_minimum(&obj, 100_000, &mut rng);
        let above = fit_value - brute;
        worst_gap = worst_gap.max(above.abs());
        worst_above = worst_above.max(above);
        if above.abs() > 1e-4 {
            failures.push(format!("instance {k}: fit {fit_value:.8} brute {brute:.8}"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "50 instances, worst |fit - brute| {worst_gap:.2e}, worst fit - brute {worst_above:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 4

fn kkt_suite(traces: &mut Traces) -> Outcome {
    let sizes = [(2, 1), (5, 5), (10, 20), (25, 10), (50, 50), (40, 10), (15, 30), (50, 5)];
    let mut converged = 0;
    let mut worst_theta = 0.0_f64;
    let mut worst_gamma = 0.0_f64;
    for k in 0..100u64 {
        let (p, q) = sizes[k as usize % sizes.len()];
        let stats = instance(p, q, 250, (2.0 / p as f64).min(0.5), (3.0 / q as f64).min(0.5), 1000 + k);
        let (lg, rg) = GridSpec::square(5).build(&stats, None);
        let pen = PenaltySpec::lasso(lg[(k as usize / 8) % 5], rg[(k as usize / 3) % 5]);
        let f = fit(&stats, &pen, &SolveOptions::default()).map_err(|e| format!("fit {k}: {e}"))?;
        traces.add(&f);
        if !f.converged {
            continue;
        }
        converged += 1;
        let s = residual_scatter(&stats, &f.gamma).map_err(|e| e.to_string())?;
        worst_theta = worst_theta.max(subgradient_violation(&s, pen.rho, None, &f.theta, &f.w, NONZERO_TOL));
        worst_gamma = worst_gamma.max(gamma_kkt_violation(&stats, &f.theta, &f.gamma, &pen));
    }
    check(
        converged >= 95 && worst_theta <= 1e-3 && worst_gamma <= 1e-3,
        format!("{converged}/100 converged; worst Θ subgradient violation {worst_theta:.2e}, worst Γ stationarity violation {worst_gamma:.2e}"),
    )
}

// ---------------------------------------------------------------- 5

fn monotonicity(traces: &mut Traces) -> Outcome {
    // Warm-started paths add fits that start away from the default initializer.
    for k in 0..10u64 {
        let stats = instance(12, 6, 150, 0.2, 0.4, 3000 + k);
        let (lg, rg) = GridSpec::square(6).build(&stats, None);
        let mut warm: Option<CggmFit> = None;
        for &lambda in &lg {
            let pen = PenaltySpec::lasso(lambda, rg[(k as usize) % 6]);
            let f = cggm::fit_from(&stats, &pen, &SolveOptions::default(), warm.as_ref()).map_err(|e| e.to_string())?;
            traces.add(&f);
            warm = Some(f);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0;
    for t in &traces.0 {
        for w in t.windows(2) {
            steps += 1;
            worst = worst.max((w[1] - w[0]) / (1.0 + w[0].abs()));
        }
    }
    check(
        worst <= 1e-8,
        format!("{} fits, {steps} half-steps, largest relative increase {worst:.2e}", traces.0.len()),
    )
}

// ---------------------------------------------------------------- 6

fn reduction_identity(traces: &mut Traces) -> Outcome {
    let opts = tight();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = 0.0_f64;
    let mut nonzero_gamma = 0;
    for k in 0..20u64 {
        let (p, q) = [(3, 2), (5, 3), (10, 5), (25, 10)][k as usize % 4];
        let stats = instance(p, q, 200, 0.3, 0.4, 4000 + k);
        let rho = rng.random_range(0.05..0.3);
        let g = glasso(&stats.c_y, rho, None, None, &opts.glasso).map_err(|e| e.to_string())?;
        let lmax = lambda_max(&stats, &g.theta, None);
        let f = fit(&stats, &PenaltySpec::lasso(10.0 * lmax, rho), &opts).map_err(|e| e.to_string())?;
        traces.add(&f);
        nonzero_gamma += f.gamma.iter().filter(|v| **v != 0.0).count();
        worst = worst.max((&f.theta - &g.theta).amax());
    }
    check(
        nonzero_gamma == 0 && worst <= 1e-8,
        format!("20 datasets, nonzero Γ entries {nonzero_gamma}, largest |Θ - glasso| {worst:.2e}"),
    )
}

// ---------------------------------------------------------------- 7

fn bic_unit_value() -> Outcome {
    let stats = SufficientStats::from_parts(Matrix::identity(2, 2), Matrix::zeros(2, 1), Matrix::identity(1, 1), 100)
        .map_err(|e| e.to_string())?;
    let f = CggmFit {
        theta: Matrix::identity(2, 2),
        w: Matrix::identity(2, 2),
        gamma: Matrix::zeros(2, 1),
        penalty: PenaltySpec::lasso(0.1, 0.1),
        objective_trace: vec![],
        iterations: 0,
        converged: true,
        warnings: vec![],
    };
    let b = bic(&f, &stats).map_err(|e| e.to_string())?;
    check((b - 209.2103).abs() <= 1e-3, format!("BIC {b:.6}"))
}

// ---------------------------------------------------------------- 8

fn generator_invariants() -> Outcome {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for (p, draws) in [(5usize, 334u64), (25, 333), (100, 333)] {
        let prob = 2.0 / p as f64;
        let mut links = 0usize;
        let mut max_row = 0.0_f64;
        for d in 0..draws {
            let theta = gen_precision(p, prob, 10_000 * p as u64 + d);
            for i in 0..p {
                let row: f64 = (0..p).filter(|&j| j != i).map(|j| theta[(i, j)].abs()).sum();
                max_row = max_row.max(row);
                if row >= theta[(i, i)] {
                    failures.push(format!("p={p} draw {d}: row {i} not strictly dominant"));
                }
                links += ((i + 1)..p).filter(|&j| theta[(i, j)] != 0.0).count();
            }
            if theta.clone().cholesky().is_none() {
                failures.push(format!("p={p} draw {d}: not positive definite"));
            }
        }
        let trials = draws as f64 * (p * (p - 1) / 2) as f64;
        let freq = links as f64 / trials;
        let se = (prob * (1.0 - prob) / trials).sqrt();
        if (freq - prob).abs() > 3.0 * se {
            failures.push(format!("p={p}: link frequency {freq:.5} vs {prob:.5} (3 SE = {:.5})", 3.0 * se));
        }
        notes.push(format!("p={p}: freq {freq:.4}/{prob:.4}, max row sum {max_row:.3}"));
    }
    check(
        failures.is_empty(),
        format!("1000 draws; {}{}", notes.join(", "), if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }),
    )
}

// ---------------------------------------------------------------- 9

fn metric_identities() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..200 {
        let p = 2 + k % 6;
        let theta = gen_precision(p, 0.4, 9000 + k as u64);
        let l = quadratic_loss(&theta, &theta).map_err(|e| e.to_string())?;
        if l.abs() > 1e-20 {
            failures.push(format!("identity loss {l:e} at p={p}"));
        }
    }
    let diag = |v: &[f64]| Matrix::from_diagonal(&cggm::Vector::from_row_slice(v));
    let i2 = Matrix::identity(2, 2);
    for (hat, want) in [(diag(&[2.0, 2.0]), 2.0), (diag(&[1.0, 3.0]), 4.0)] {
        let l = quadratic_loss(&i2, &hat).map_err(|e| e.to_string())?;
        if l != want {
            failures.push(format!("loss {l} expected {want}"));
        }
    }
    for _ in 0..1000 {
        let p = rng.random_range(1..9);
        let mut a = Matrix::from_fn(p, p, |_, _| rng.random_range(-2.0..2.0));
        a = (&a + a.transpose()) * 0.5;
        let n = delta_norms(&Matrix::zeros(p, p), &a).map_err(|e| e.to_string())?;
        let slack = 1e-12 * (1.0 + n.frobenius);
        if n.elem_inf > n.frobenius + slack || n.spectral > n.frobenius + slack || n.spectral > n.mat_inf + slack {
            failures.push(format!("norm ordering violated: {n:?}"));
        }
    }
    if matthews(1, 1, 1, 1) != 0.0 {
        failures.push("balanced MCC is not zero".into());
    }
    check(
        failures.is_empty(),
        format!("loss identity on 200 matrices, norm ordering on 1000 symmetric Δ, balanced MCC{}", if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }),
    )
}

// ---------------------------------------------------------------- 10

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_cggm"))
            .args(["bench", "--seed", "7"])
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    if !a.status.success() || !b.status.success() {
        return Err(format!("bench failed: {}", String::from_utf8_lossy(&a.stderr)));
    }
    check(
        a.stdout == b.stdout && !a.stdout.is_empty(),
        format!("two runs of `bench --seed 7`, {} bytes each, identical: {}", a.stdout.len(), a.stdout == b.stdout),
    )
}

fn main() {
    let mut traces = Traces::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Traces) -> Outcome>)> = vec![
        ("Model 3 reproduction", Box::new(|_| model3_reproduction())),
        ("Model 2 ordering", Box::new(|_| model2_ordering())),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("KKT suite", Box::new(kkt_suite)),
        ("reduction identity", Box::new(reduction_identity)),
        ("BIC unit value", Box::new(|_| bic_unit_value())),
        ("generator invariants", Box::new(|_| generator_invariants())),
        ("metric identities", Box::new(|_| metric_identities())),
        ("determinism", Box::new(|_| determinism())),
        // Runs last so it sees the traces of every fit above.
        ("monotonicity", Box::new(monotonicity)),
    ];
    let numbers = [1, 2, 3, 4, 6, 7, 8, 9, 10, 5];
    let mut failed = 0;
    for ((name, run), number) in criteria.into_iter().zip(numbers) {
        let start = Instant::now();
        let outcome = run(&mut traces);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{number:>2}] {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{number:>2}] {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
