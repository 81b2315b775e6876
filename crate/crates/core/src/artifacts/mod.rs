//! Self-describing model bundles: canonical JSON files holding everything
//! needed to turn named raw features into a prediction.

mod bundle;
mod canonical;
mod predict;

use std::path::PathBuf;

use thiserror::Error;

pub use bundle::{
    bundles_from_run, dataset_fingerprint, BundleMetadata, FeatureSchema, ImportanceEntry,
    ImportanceReport, ModelBundle, ModelKind, ModelParams, BUNDLE_EXTENSION, SCHEMA_VERSION,
};
pub use canonical::{load_bundle, save_bundle, to_canonical_json};
pub use predict::{
    predict, FeatureValue, PredictError, Prediction, PredictionWarning, WarningCode,
};

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error(
        "bundle schema version {found} is not supported (this build reads version {expected})"
    )]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("corrupt bundle: {0}")]
    CorruptBundle(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
