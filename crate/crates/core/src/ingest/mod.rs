//! Raw CSV ingestion, MOF-name parsing, cleaning and label encoding.

mod clean;
mod codebook;
mod column_map;
mod name;
mod raw;

pub use clean::{clean, derive_void_fraction, CleanTable, CleaningRules, DropCounts, DropReason};
pub use codebook::{encode_labels, Codebook};
pub use column_map::{ColumnMap, FeatureColumn, FeatureKind, NAME_FEATURES};
pub use name::{parse_mof_name, NameFeatures, NameParseError};
pub use raw::{load_csv, RawTable};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file: {path}")]
    MissingFile { path: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("column {column:?} not found in the header row")]
    MissingColumn { column: String },
    #[error("duplicate header {column:?}")]
    DuplicateHeader { column: String },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("invalid column map: {0}")]
    InvalidMap(String),
    #[error(transparent)]
    NameParse(#[from] NameParseError),
    #[error("total volume must be positive, got {total_volume}")]
    NonPositiveTotalVolume { total_volume: f64 },
    #[error("cleaning dropped all {input_rows} rows")]
    EmptyResult { input_rows: usize },
}
