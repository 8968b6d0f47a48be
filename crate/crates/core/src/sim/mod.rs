//! Simulation models, evaluation metrics, the mLasso baseline and the
//! replicated benchmark harness.

pub mod bench;
pub mod generate;
pub mod metrics;
pub mod mlasso;

pub use bench::{run_benchmark, BenchGrids, BenchRow, BenchTable, Method, MetricValues, SummaryRow};
pub use generate::{gen_dataset, gen_gamma, gen_precision, gen_precision_with, SimConfig, SimModel, Symmetrization};
pub use metrics::{delta_norms, matthews, quadratic_loss, support_metrics, DeltaNorms, GraphReport, SupportMetrics};
pub use mlasso::{mlasso_graph, mlasso_graph_bic, mlasso_lambda_max, MlassoGraph};
