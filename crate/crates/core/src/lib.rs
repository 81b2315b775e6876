//! Tabular regression toolkit for metal-organic framework descriptor data:
//! ingestion and cleaning, preprocessing, linear/Lasso/forest/neural models,
//! evaluation reports and self-contained model bundles.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod evaluate;
pub mod forest;
pub mod ingest;
pub mod linear;
pub mod model;
pub mod neuralnet;
pub mod numeric;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
