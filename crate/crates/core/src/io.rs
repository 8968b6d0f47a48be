//! Delimited matrix files and the fit, grid and benchmark writers.
//!
//! Every number is written with 12 significant digits (`%.12g`).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CggmError, Result};
use crate::linalg::Matrix;
use crate::model::CggmFit;
use crate::selection::{BicRecord, NONZERO_TOL};
use crate::sim::{BenchTable, MetricValues, MlassoGraph};

/// A parsed matrix with its optional header names.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub data: Matrix,
    pub names: Option<Vec<String>>,
}

/// `%.12g` formatting.
pub fn format_g(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CggmError {
    CggmError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Read a delimited numeric matrix, rows = samples. Blank lines are skipped;
/// NaN and infinite entries are rejected.
pub fn read_matrix(path: impl AsRef<Path>, delimiter: char, has_header: bool) -> Result<LabeledMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CggmError::io(path, e))?;
    let mut names = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut header_pending = has_header;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CggmError::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        if header_pending {
            header_pending = false;
            width = Some(cells.len());
            names = Some(cells.iter().map(|c| c.to_string()).collect());
            continue;
        }
        match width {
            Some(w) if w != cells.len() => {
                return Err(parse_err(path, lineno, format!("expected {w} fields, found {}", cells.len())));
            }
            None => width = Some(cells.len()),
            _ => {}
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("field {} is not a number: '{cell}'", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("field {} is not finite", c + 1)));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no numeric rows"));
    }
    let ncols = rows[0].len();
    let data = Matrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]);
    Ok(LabeledMatrix { data, names })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CggmError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CggmError::io(path, e))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    for line in lines {
        writeln!(w, "{line}").map_err(|e| CggmError::io(path, e))?;
    }
    finish(w, path)
}

/// Write `m` with `delimiter`; `names` become a header row.
pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix, names: Option<&[String]>, delimiter: char) -> Result<()> {
    let path = path.as_ref();
    let d = delimiter.to_string();
    let header = names.map(|n| n.join(&d));
    let body = (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| format_g(m[(r, c)])).collect::<Vec<_>>().join(&d));
    write_lines(path, header.into_iter().chain(body))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CggmError::io(path, std::io::Error::other(e)))?;
    writeln!(w).map_err(|e| CggmError::io(path, e))?;
    finish(w, path)
}

/// `−θ_ij / √(θ_ii θ_jj)`.
pub fn partial_correlation(theta: &Matrix, i: usize, j: usize) -> f64 {
    -theta[(i, j)] / (theta[(i, i)] * theta[(j, j)]).sqrt()
}

/// Names from a header, or `prefix1..prefixN`.
pub fn default_names(names: Option<&[String]>, prefix: &str, len: usize) -> Vec<String> {
    match names {
        Some(n) if n.len() == len => n.to_vec(),
        _ => (1..=len).map(|k| format!("{prefix}{k}")).collect(),
    }
}

/// Summary written to `fit.json`.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub lambda: f64,
    pub rho: f64,
    pub adaptive: bool,
    pub exponent: f64,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub edges: usize,
    pub associations: usize,
}

pub struct FitFiles {
    pub theta: PathBuf,
    pub gamma: PathBuf,
    pub edges: PathBuf,
    pub assoc: PathBuf,
    pub summary: PathBuf,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CggmError::io(dir, e))
}

/// Write `theta.tsv`, `gamma.tsv`, `edges.tsv`, `assoc.tsv` and `fit.json` into `outdir`.
pub fn write_fit(
    fit: &CggmFit,
    gene_names: Option<&[String]>,
    marker_names: Option<&[String]>,
    outdir: impl AsRef<Path>,
) -> Result<FitFiles> {
    let dir = outdir.as_ref();
    ensure_dir(dir)?;
    let (p, q) = fit.gamma.shape();
    let genes = default_names(gene_names, "gene", p);
    let markers = default_names(marker_names, "marker", q);
    let files = FitFiles {
        theta: dir.join("theta.tsv"),
        gamma: dir.join("gamma.tsv"),
        edges: dir.join("edges.tsv"),
        assoc: dir.join("assoc.tsv"),
        summary: dir.join("fit.json"),
    };
    write_matrix(&files.theta, &fit.theta, None, '\t')?;
    write_matrix(&files.gamma, &fit.gamma, None, '\t')?;

    let mut edges = vec!["gene_i\tgene_j\ttheta_ij\tpartial_correlation".to_string()];
    for i in 0..p {
        for j in (i + 1)..p {
            let v = fit.theta[(i, j)];
            if v.abs() > NONZERO_TOL {
                edges.push(format!(
                    "{}\t{}\t{}\t{}",
                    genes[i],
                    genes[j],
                    format_g(v),
                    format_g(partial_correlation(&fit.theta, i, j))
                ));
            }
        }
    }
    let n_edges = edges.len() - 1;
    write_lines(&files.edges, edges)?;

    let mut assoc = vec!["gene\tmarker\tgamma".to_string()];
    for i in 0..p {
        for k in 0..q {
            let v = fit.gamma[(i, k)];
            if v.abs() > NONZERO_TOL {
                assoc.push(format!("{}\t{}\t{}", genes[i], markers[k], format_g(v)));
            }
        }
    }
    let n_assoc = assoc.len() - 1;
    write_lines(&files.assoc, assoc)?;

    let summary = FitSummary {
        lambda: fit.penalty.lambda,
        rho: fit.penalty.rho,
        adaptive: fit.penalty.adaptive,
        exponent: fit.penalty.exponent,
        objective: fit.objective(),
        objective_trace: fit.objective_trace.clone(),
        iterations: fit.iterations,
        converged: fit.converged,
        warnings: fit.warnings.clone(),
        edges: n_edges,
        associations: n_assoc,
    };
    write_json(&files.summary, &summary)?;
    Ok(files)
}

/// `edges.tsv` (AND-rule edges with both coefficients) and `assoc.tsv` for an mLasso graph.
pub fn write_mlasso(
    graph: &MlassoGraph,
    gene_names: Option<&[String]>,
    marker_names: Option<&[String]>,
    outdir: impl AsRef<Path>,
) -> Result<()> {
    let dir = outdir.as_ref();
    ensure_dir(dir)?;
    let (p, q) = graph.marker_coefficients.shape();
    let genes = default_names(gene_names, "gene", p);
    let markers = default_names(marker_names, "marker", q);
    let mut edges = vec!["gene_i\tgene_j\tcoef_i_in_j\tcoef_j_in_i".to_string()];
    for i in 0..p {
        for j in (i + 1)..p {
            if graph.adjacency[(i, j)] {
                edges.push(format!(
                    "{}\t{}\t{}\t{}",
                    genes[i],
                    genes[j],
                    format_g(graph.gene_coefficients[(i, j)]),
                    format_g(graph.gene_coefficients[(j, i)])
                ));
            }
        }
    }
    write_lines(&dir.join("edges.tsv"), edges)?;
    let mut assoc = vec!["gene\tmarker\tcoefficient".to_string()];
    for j in 0..p {
        for k in 0..q {
            let v = graph.marker_coefficients[(j, k)];
            if v.abs() > NONZERO_TOL {
                assoc.push(format!("{}\t{}\t{}", genes[j], markers[k], format_g(v)));
            }
        }
    }
    write_lines(&dir.join("assoc.tsv"), assoc)
}

/// One line per grid cell: `lambda rho bic s_n k_n converged selected`.
pub fn write_bic_grid(path: impl AsRef<Path>, table: &[BicRecord], selected: usize) -> Result<()> {
    let header = "lambda\trho\tbic\ts_n\tk_n\tconverged\tselected".to_string();
    let body = table.iter().enumerate().map(|(k, r)| {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            format_g(r.lambda),
            format_g(r.rho),
            format_g(r.bic),
            r.s_n,
            r.k_n,
            r.converged,
            k == selected
        )
    });
    write_lines(path.as_ref(), std::iter::once(header).chain(body))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_g).unwrap_or_else(|| "NA".into())
}

const BENCH_HEADER: &str = "kind\treplication\tseed\tmethod\tlambda\trho\tloss\tnorm_elem_inf\tnorm_mat_inf\t\
norm_spectral\tnorm_frobenius\tdist\tspe\tsen\tmcc\tdegenerate\tsuccesses\terror";

fn metric_cells(m: &MetricValues) -> String {
    [m.loss, m.norm_elem_inf, m.norm_mat_inf, m.norm_spectral, m.norm_frobenius, m.dist, m.spe, m.sen, m.mcc]
        .into_iter()
        .map(opt)
        .collect::<Vec<_>>()
        .join("\t")
}

/// The benchmark as TSV lines: one `rep` row per cell, then `mean` and `se` rows per method.
pub fn bench_table_lines(table: &BenchTable) -> Vec<String> {
    let mut out = vec![BENCH_HEADER.to_string()];
    for row in &table.rows {
        let metrics = match &row.report {
            Some(r) => format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t1\t",
                [r.loss, r.norm_elem_inf, r.norm_mat_inf, r.norm_spectral, r.norm_frobenius]
                    .into_iter()
                    .map(opt)
                    .collect::<Vec<_>>()
                    .join("\t"),
                r.dist,
                format_g(r.spe),
                format_g(r.sen),
                format_g(r.mcc),
                r.degenerate,
            ),
            None => format!(
                "{}\tNA\t0\t{}",
                ["NA"; 9].join("\t"),
                row.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ")
            ),
        };
        out.push(format!(
            "rep\t{}\t{}\t{}\t{}\t{}\t{}",
            row.replication,
            row.seed,
            row.method,
            opt(row.lambda),
            opt(row.rho),
            metrics
        ));
    }
    for s in &table.summary {
        for (kind, vals) in [("mean", &s.mean), ("se", &s.se)] {
            out.push(format!(
                "{kind}\tNA\tNA\t{}\tNA\tNA\t{}\tNA\t{}\t",
                s.method,
                metric_cells(vals),
                s.successes
            ));
        }
    }
    out
}

pub fn write_bench_table(path: impl AsRef<Path>, table: &BenchTable) -> Result<()> {
    write_lines(path.as_ref(), bench_table_lines(table))
}
