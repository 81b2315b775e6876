//! Metrics, descriptive statistics and the multi-model comparison.

mod compare;
mod metrics;
mod report;
mod stats;

use thiserror::Error;

use crate::preprocess::PreprocessError;

pub use compare::{
    compare_models, CompareOptions, ComparisonReport, ComparisonRow, ComparisonRun,
    LassoModelConfig, LassoPathPoint, ModelConfig, NnModelConfig, PcaModelConfig, TrainedModel,
};
pub use metrics::{compute_metrics, Metrics};
pub use report::{comparison_csv, comparison_table, timings_csv, PERCENT_ERROR_DEFINITION};
pub use stats::{histogram, histogram_with_edges, pearson_matrix, CorrelationMatrix, Histogram};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no values to evaluate")]
    EmptyInput,
    #[error("need at least {needed} rows, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid histogram bins: {0}")]
    InvalidBins(String),
    #[error("no models configured")]
    NoModels,
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}
