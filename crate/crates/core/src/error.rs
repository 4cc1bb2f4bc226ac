use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, UpmError>;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped so the CLI can map them onto exit codes: configuration
/// problems, data problems and numeric failures.
#[derive(Debug, Error)]
pub enum UpmError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: expected {expected} cells, got {got}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("unknown label value {0:?}")]
    UnknownLabel(String),
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("no data rows")]
    NoRows,
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{member} failed to train: {source}")]
    Member {
        member: &'static str,
        #[source]
        source: Box<UpmError>,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("dataset {dataset:?}: {source}")]
    Dataset {
        dataset: String,
        #[source]
        source: Box<UpmError>,
    },
}

/// Coarse error category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl UpmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UpmError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_dataset(self, dataset: impl Into<String>) -> Self {
        UpmError::Dataset {
            dataset: dataset.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            UpmError::Config(_) | UpmError::InvalidArgument(_) => ErrorClass::Config,
            UpmError::Numeric(_) => ErrorClass::Numeric,
            UpmError::Member { source, .. } | UpmError::Dataset { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }
}
