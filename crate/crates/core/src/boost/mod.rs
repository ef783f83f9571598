//! Second-order gradient-boosted trees, cross-validated random search and
//! the evaluation metrics.

mod config;
mod cv;
mod dataset;
mod metrics;
mod model;
mod search;
mod tree;

pub use config::{mix_seed, GbtConfig, Grid, Objective};
pub use cv::{label_strata, quartile_strata, stratified_repeated_kfold, Folds};
pub use dataset::Dataset;
pub use metrics::{
    balanced_accuracy, classification_metrics, estimation_error_rate, regression_metrics, ClassificationMetrics,
    RegressionMetrics,
};
pub use model::{check_target, sigmoid, train, GbtModel, MODEL_FORMAT_VERSION};
pub use search::{
    cross_validate, objective_for, random_search, sample_configs, ClassificationSummary, CvOptions, CvPlan, EvalReport,
    FoldResult, MeanStd, RegressionSummary, SearchOptions, SearchResult, Trial,
};
pub use tree::{Node, Split, Tree};

use crate::stats::StatsError;

#[derive(Debug, thiserror::Error)]
pub enum BoostError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("model feature {0:?} not present in input")]
    MissingFeature(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[cfg(test)]
mod tests;
