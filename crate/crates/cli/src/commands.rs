use std::fs;
use std::io::Write;
use std::path::Path;

use cggm::io::{
    bench_table_lines, read_matrix, write_bench_table, write_bic_grid, write_fit, write_json, write_matrix,
    write_mlasso, LabeledMatrix,
};
use cggm::selection::{log_grid, GridSpec};
use cggm::sim::{
    gen_dataset, mlasso_graph, mlasso_graph_bic, mlasso_lambda_max, run_benchmark, BenchGrids, GraphReport,
    Method, SimConfig, SimModel,
};
use cggm::{
    adaptive_weights, fit, grid_search, CggmError, CggmFit, Dataset, PenaltySpec, Result, SolveOptions,
    SufficientStats,
};

use crate::args::{BenchArgs, DataArgs, EvalArgs, FitArgs, MlassoArgs, SimArgs, SimulateArgs, SolverArgs, TuneArgs};

struct Loaded {
    data: Dataset,
    genes: Option<Vec<String>>,
    markers: Option<Vec<String>>,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    let d = args.delimiter.as_char();
    let LabeledMatrix { data: y, names: genes } = read_matrix(&args.y, d, args.header)?;
    let LabeledMatrix { data: x, names: markers } = read_matrix(&args.x, d, args.header)?;
    Ok(Loaded {
        data: Dataset::new(y, x)?,
        genes,
        markers,
    })
}

fn solve_options(s: &SolverArgs, center: bool) -> SolveOptions {
    SolveOptions {
        tol_outer: s.tol,
        max_outer: s.max_iter,
        gamma_first: s.gamma_first,
        center,
        ..SolveOptions::default()
    }
}

fn sim_config(args: &SimArgs) -> Result<SimConfig> {
    let mut cfg = if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CggmError::Io { path: path.clone(), source: e })?;
        serde_json::from_str::<SimConfig>(&text).map_err(|e| CggmError::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?
    } else if let Some(m) = args.model {
        SimConfig::preset(m, 0)?
    } else {
        match (args.p, args.q, args.n, args.theta_prob, args.gamma_prob) {
            (Some(p), Some(q), Some(n), Some(tp), Some(gp)) => SimConfig {
                p,
                q,
                n,
                theta_link_prob: tp,
                gamma_link_prob: gp,
                seed: 0,
                symmetrization: Default::default(),
            },
            _ => {
                return Err(CggmError::Input(
                    "give --config, --model, or all of --p --q --n --theta-prob --gamma-prob".into(),
                ))
            }
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CggmError::Io { path: dir.to_path_buf(), source: e })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = sim_config(&args.sim)?;
    let model = SimModel::generate(&cfg)?;
    let data = gen_dataset(&model, cfg.n, cfg.seed)?;
    ensure_dir(&args.out)?;
    write_matrix(args.out.join("Y.tsv"), data.y(), None, '\t')?;
    write_matrix(args.out.join("X.tsv"), data.x(), None, '\t')?;
    write_matrix(args.out.join("theta_true.tsv"), &model.theta_true, None, '\t')?;
    write_matrix(args.out.join("gamma_true.tsv"), &model.gamma_true, None, '\t')?;
    Ok(())
}

fn finish_fit(fit: &CggmFit, force: bool, loaded: &Loaded, out: &Path) -> Result<()> {
    if !fit.converged && !force {
        return Err(CggmError::NotConverged {
            what: "cggm fit (use --force to write it anyway)".into(),
            iterations: fit.iterations,
            last: fit.objective_trace.last().copied().into_iter().collect(),
        });
    }
    write_fit(fit, loaded.genes.as_deref(), loaded.markers.as_deref(), out)?;
    Ok(())
}

pub fn fit_cmd(args: &FitArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    let opts = solve_options(&args.solver, !args.data.no_center);
    let stats = SufficientStats::from_dataset(&loaded.data, opts.center);
    let pen = if args.adaptive {
        let (gw, tw) = adaptive_weights(&stats, PenaltySpec::DEFAULT_EXPONENT)?;
        PenaltySpec::weighted(args.lambda, args.rho, gw, tw)
    } else {
        PenaltySpec::lasso(args.lambda, args.rho)
    };
    let f = fit(&stats, &pen, &opts)?;
    finish_fit(&f, args.force, &loaded, &args.out)
}

pub fn tune(args: &TuneArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    let opts = solve_options(&args.solver, !args.data.no_center);
    let stats = SufficientStats::from_dataset(&loaded.data, opts.center);
    let spec = GridSpec {
        lambda_len: args.grid_len,
        rho_len: args.grid_len,
        lambda_ratio: args.lambda_ratio,
        rho_ratio: args.rho_ratio,
    };
    let (auto_l, auto_r) = spec.build(&stats, None);
    let lg = args.lambda_grid.clone().unwrap_or(auto_l);
    let rg = args.rho_grid.clone().unwrap_or(auto_r);
    let search = grid_search(&stats, &lg, &rg, args.adaptive, &opts)?;
    ensure_dir(&args.out)?;
    write_bic_grid(args.out.join("bic_grid.tsv"), &search.table, search.best_index)?;
    finish_fit(&search.best, true, &loaded, &args.out)
}

pub fn mlasso(args: &MlassoArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    if args.data.no_center {
        return Err(CggmError::Input("mlasso always centers its regressions".into()));
    }
    let graph = match (args.lambda, args.bic) {
        (Some(l), false) => mlasso_graph(&loaded.data, l, cggm::selection::NONZERO_TOL)?,
        _ => {
            let lmax = mlasso_lambda_max(&loaded.data).max(f64::MIN_POSITIVE);
            let grid = log_grid(lmax, args.lambda_ratio, args.grid_len);
            mlasso_graph_bic(&loaded.data, &grid, cggm::selection::NONZERO_TOL)?
        }
    };
    write_mlasso(&graph, loaded.genes.as_deref(), loaded.markers.as_deref(), &args.out)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let truth = read_matrix(&args.truth, '\t', false)?.data;
    let est = read_matrix(&args.est, '\t', false)?.data;
    if truth.shape() != est.shape() || truth.nrows() != truth.ncols() {
        return Err(CggmError::Input("truth and estimate must be square and of equal size".into()));
    }
    let report: GraphReport = GraphReport::for_estimate(&truth, &est, args.tol)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_json(&args.out, &report)
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let mut sim = args.sim.clone();
    if sim.config.is_none() && sim.model.is_none() && sim.p.is_none() {
        sim.model = Some(3);
    }
    let cfg = sim_config(&sim)?;
    let methods = args.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    let grids = BenchGrids {
        spec: GridSpec {
            lambda_len: args.grid_len,
            rho_len: args.grid_len,
            lambda_ratio: args.lambda_ratio,
            rho_ratio: args.rho_ratio,
        },
    };
    let opts = solve_options(&args.solver, true);
    let table = run_benchmark(&cfg, args.replications, &methods, &grids, &opts)?;
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            write_bench_table(path, &table)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for line in bench_table_lines(&table) {
                writeln!(lock, "{line}").map_err(|e| CggmError::Io { path: "<stdout>".into(), source: e })?;
            }
            Ok(())
        }
    }
}
