//! Standardization, seeded train/test splitting and PCA.

mod pca;
mod scaler;
mod split;

pub use pca::{components_for_variance, pca_fit, PcaModel, PcaTarget};
pub use scaler::{fit_scaler, Scaler};
pub use split::{split, SplitIndices};

use thiserror::Error;

use crate::numeric::NumericError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("need at least {needed} rows, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("split of {n_rows} rows at ratio {ratio} leaves an empty side")]
    DegenerateSplit { n_rows: usize, ratio: f64 },
    #[error("expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid component request: {0}")]
    InvalidComponents(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}
