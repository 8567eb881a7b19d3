use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A row of an input file could not be turned into a sample.
    #[error("ingest error in {path} at row {row}: {message}")]
    Ingest {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("DST normalization error on {date}: {message}")]
    Normalization {
        date: chrono::NaiveDate,
        message: String,
    },
    #[error("data quality error: {0}")]
    DataQuality(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("insufficient data: {rows} rows for {columns} columns (need at least columns + 1)")]
    InsufficientData { rows: usize, columns: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 config, 2 data, 3 modelling.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schema(_) => 1,
            Error::Ingest { .. }
            | Error::Normalization { .. }
            | Error::DataQuality(_)
            | Error::Alignment(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::Coverage(_)
            | Error::InsufficientData { .. }
            | Error::Domain(_)
            | Error::Training(_) => 3,
        }
    }
}
