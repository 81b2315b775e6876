//! CART regression trees and a bootstrap-aggregated random forest.
//!
//! Splits maximize the variance reduction `n·Var(parent) − n_L·Var(L) − n_R·Var(R)`.
//! Every tree draws its bootstrap sample and its per-node feature subsets
//! from its own child stream, so parallel training is reproducible.

mod ensemble;
mod tree;

use thiserror::Error;

use crate::model::DimensionMismatch;

pub use ensemble::{forest_fit, importances_csv, Forest, ForestConfig, ImportanceRow};
pub use tree::{best_split, tree_fit, Split, Tree, TreeNode, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("target length {found} does not match {expected} rows")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}
