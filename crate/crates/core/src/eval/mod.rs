//! Classification and regression metrics, ROC analysis and the nested
//! cross-validation protocol used to tune and assess the boosted models.

pub mod benchmark;
pub mod cv;
pub mod metrics;
pub mod report;

pub use benchmark::{ablation_table, baseline_results, fit_final, run_benchmark, BaselineResult, BenchmarkConfig, BenchmarkReport};
pub use cv::{
    nested_cv, randomized_search, stratified_folds, stream_rng, CvConfig, CvReport, FoldReport, ParamDistribution, SearchResult,
};
pub use metrics::{
    classification_metrics, positive_rate, regression_metrics, roc_auc, roc_curve, threshold_classify,
    trapezoid_area, ClassificationMetrics, ConfusionMatrix, RegressionMetrics, RocPoint,
};
pub use report::{parse_roc_csv, roc_csv, ComparisonTable, TableSection};
