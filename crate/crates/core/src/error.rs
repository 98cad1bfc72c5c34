use thiserror::Error;

/// Errors raised across the document model, generators, model and workflow.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid bounding box {0:?}")]
    InvalidBBox([i64; 4]),

    #[error("insufficient documents: requested {requested}, available {available}")]
    InsufficientDocuments { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("overflow: {what} has {got} items, limit is {limit}")]
    Overflow {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("empty query")]
    EmptyQuery,

    #[error("no entities to point at")]
    NoEntities,

    #[error("index {index} out of range for {len} candidates")]
    Index { index: usize, len: usize },

    #[error("missing label for token {token} in document {doc}")]
    MissingLabel { doc: String, token: usize },

    #[error("stage {stage} requires {what} but document {doc} has none")]
    MissingAnnotation {
        stage: &'static str,
        doc: String,
        what: &'static str,
    },

    #[error("document id mismatch: {0}")]
    IdMismatch(String),

    #[error("empty guidance set: ratio {ratio} of {available} documents selects nothing")]
    EmptyGuidance { ratio: f64, available: usize },

    #[error("annotation provider failed on document {doc}: {reason}")]
    Provider { doc: String, reason: String },

    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than
    /// failures while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Provider { .. } | Error::Csv(_) | Error::Checkpoint(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
