use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cggm", version, about = "Sparse conditional Gaussian graphical models")]
pub struct Cli {
    /// Worker threads for tuning and benchmarking (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic model and dataset: Y.tsv, X.tsv, theta_true.tsv, gamma_true.tsv.
    Simulate(SimulateArgs),
    /// Fit at one (lambda, rho) pair.
    Fit(FitArgs),
    /// Fit over a (lambda, rho) grid and keep the BIC-best fit.
    Tune(TuneArgs),
    /// Neighbourhood-selection baseline: edges.tsv and assoc.tsv.
    Mlasso(MlassoArgs),
    /// Compare an estimated precision matrix with the truth: metrics.json.
    Eval(EvalArgs),
    /// Replicated simulation benchmark: one TSV table with mean and SE rows.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Delimiter {
    Tab,
    Comma,
}

impl Delimiter {
    pub fn as_char(self) -> char {
        match self {
            Delimiter::Tab => '\t',
            Delimiter::Comma => ',',
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Expression matrix, rows = samples.
    #[arg(long)]
    pub y: PathBuf,
    /// Marker matrix, rows = samples.
    #[arg(long)]
    pub x: PathBuf,
    /// Input files start with a header row of names.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, default_value_t = Delimiter::Tab)]
    pub delimiter: Delimiter,
    /// Do not subtract column means.
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Relative objective change that ends the outer loop.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Update Γ before Θ in each outer iteration.
    #[arg(long)]
    pub gamma_first: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// JSON document with the simulation configuration.
    #[arg(long, conflicts_with_all = ["model", "p", "q", "n", "theta_prob", "gamma_prob"])]
    pub config: Option<PathBuf>,
    /// Numbered preset model (1 to 6).
    #[arg(long, conflicts_with_all = ["p", "q", "n", "theta_prob", "gamma_prob"])]
    pub model: Option<u32>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Link probability for off-diagonal precision entries.
    #[arg(long)]
    pub theta_prob: Option<f64>,
    /// Link probability for regression coefficients.
    #[arg(long)]
    pub gamma_prob: Option<f64>,
    /// Base seed; overrides the seed in --config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub rho: f64,
    /// Adaptive weights from the unpenalized fit (needs n > max(p, q)).
    #[arg(long)]
    pub adaptive: bool,
    /// Write output even if the solver did not converge.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Explicit λ grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Explicit ρ grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rho_grid: Option<Vec<f64>>,
    /// Points per automatic grid.
    #[arg(long, default_value_t = 10)]
    pub grid_len: usize,
    /// Smallest / largest value of the automatic λ grid.
    #[arg(long, default_value_t = 0.05)]
    pub lambda_ratio: f64,
    /// Smallest / largest value of the automatic ρ grid.
    #[arg(long, default_value_t = 0.05)]
    pub rho_ratio: f64,
    #[arg(long)]
    pub adaptive: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MlassoArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Penalty shared by every regression.
    #[arg(long, required_unless_present = "bic")]
    pub lambda: Option<f64>,
    /// Choose each regression's penalty by BIC over an automatic grid.
    #[arg(long, conflicts_with = "lambda")]
    pub bic: bool,
    #[arg(long, default_value_t = 10)]
    pub grid_len: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lambda_ratio: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub est: PathBuf,
    /// Magnitude above which an entry counts as nonzero.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 20)]
    pub replications: usize,
    /// Comma separated: cggm, acggm, glasso, aglasso, mlasso.
    #[arg(long, value_delimiter = ',', default_value = "cggm,glasso,mlasso")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 8)]
    pub grid_len: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lambda_ratio: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rho_ratio: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output table; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
