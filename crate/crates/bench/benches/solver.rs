use std::hint::black_box;

use cggm::glasso::{glasso, GlassoOptions};
use cggm::lasso::{solve_quad_lasso, QuadLassoProblem};
use cggm::selection::GridSpec;
use cggm::{fit, grid_search, PenaltySpec, SolveOptions};
use cggm_bench::{model2_stats, model3_stats};
use criterion::{criterion_group, criterion_main, Criterion};

fn lasso_kernel(c: &mut Criterion) {
    let stats = model2_stats();
    let prob = QuadLassoProblem::new(stats.c_y.clone(), stats.c_y.column(0).into_owned(), 0.05).unwrap();
    c.bench_function("quad_lasso_d50", |b| b.iter(|| solve_quad_lasso(black_box(&prob), 1e-8, 10_000).unwrap()));
}

fn glasso_engine(c: &mut Criterion) {
    let stats = model2_stats();
    let opts = GlassoOptions::default();
    c.bench_function("glasso_p50", |b| b.iter(|| glasso(black_box(&stats.c_y), 0.1, None, None, &opts).unwrap()));
}

fn cggm_fit(c: &mut Criterion) {
    let opts = SolveOptions::default();
    let m3 = model3_stats();
    c.bench_function("fit_model3", |b| b.iter(|| fit(black_box(&m3), &PenaltySpec::lasso(0.07, 0.15), &opts).unwrap()));
    let m2 = model2_stats();
    c.bench_function("fit_model2", |b| b.iter(|| fit(black_box(&m2), &PenaltySpec::lasso(0.07, 0.15), &opts).unwrap()));
}

fn bic_grid(c: &mut Criterion) {
    let stats = model3_stats();
    let (lg, rg) = GridSpec::square(8).build(&stats, None);
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    group.bench_function("model3_8x8", |b| b.iter(|| grid_search(black_box(&stats), &lg, &rg, false, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, lasso_kernel, glasso_engine, cggm_fit, bic_grid);
criterion_main!(benches);
