//! Evaluation metrics and reports.

pub mod metrics;
pub mod report;

pub use metrics::{
    accuracy, component_stats, node_pr, random_pr, size_stats, ComponentStats, MeanStd, PrecisionRecall, SizeStats,
};
pub use report::{evaluate, property_bias, EvalOptions, MetricsRecord, PropertyBias, PropertyFn, TruthKind};
