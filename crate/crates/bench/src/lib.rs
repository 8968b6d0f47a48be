//! Shared fixtures for the criterion benchmarks.

use cggm::sim::{gen_dataset, SimConfig, SimModel};
use cggm::SufficientStats;

/// Centered statistics for one draw of `config`.
pub fn stats_for(config: &SimConfig) -> SufficientStats {
    let model = SimModel::generate(config).expect("preset configurations are valid");
    let data = gen_dataset(&model, config.n, config.seed).expect("generated precision is positive definite");
    SufficientStats::from_dataset(&data, true)
}

/// Model 3 shape: 25 genes, 10 markers, 250 samples.
pub fn model3_stats() -> SufficientStats {
    stats_for(&SimConfig::model3(7))
}

/// Model 2 shape: 50 genes, 50 markers, 250 samples.
pub fn model2_stats() -> SufficientStats {
    stats_for(&SimConfig::model2(7))
}
