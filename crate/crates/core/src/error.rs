use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty table")]
    EmptyTable,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("constant label column `{0}`")]
    ConstantLabel(String),
    #[error("non-binary label: column `{column}` has {distinct} distinct values")]
    NonBinaryLabel { column: String, distinct: usize },
    #[error("positive label `{0}` does not occur in the label column")]
    UnknownPositiveLabel(String),
    #[error("missing label value at data row {0}")]
    MissingLabel(usize),
    #[error("dataset has {n} rows, too few for the requested split")]
    TooFewRows { n: usize },

    #[error("training split contains a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameter `{name}` = {value} outside [{min}, {max}]")]
    HyperparameterOutOfRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown hyperparameter `{name}` for {algorithm}")]
    UnknownHyperparameter { name: String, algorithm: String },
    #[error("invalid variant id {0}; expected 1..=4")]
    InvalidVariant(u8),

    #[error("ROC AUC undefined: labels contain a single class")]
    UndefinedAuc,
    #[error("negative importance {value} at index {index}")]
    NegativeImportance { index: usize, value: f64 },
    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },

    #[error("no manifest in {0}")]
    NoManifest(PathBuf),
    #[error("hash mismatch for `{file}`")]
    HashMismatch { file: String },
    #[error("unsupported artifact schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("{algorithm} variant {variant}: {source}")]
    Stage {
        algorithm: String,
        variant: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
