//! Metrics and experiment grids.

mod metrics;
mod sweeps;

pub use metrics::{
    anls, evaluate, mean_anls, micro_f1, per_category_accuracy, retrieval_accuracy, MetricsReport,
    ANLS_THRESHOLD,
};
pub use sweeps::{
    ratio_label, ratio_sweep, robustness_sweep, size_sweep, synthetic_subset, SweepCell,
    SweepConfig, SweepData, SweepOptions, SweepTable, DEFAULT_FRACTIONS, DEFAULT_LAMBDAS,
    DEFAULT_RATIOS,
};
