use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CelError>;

#[derive(Debug, Error)]
pub enum CelError {
    #[error("non-finite value in {gate} gate at timestep {step}")]
    NonFiniteGate { gate: &'static str, step: usize },

    #[error("non-finite gradient in parameter group `{group}` at index {index}")]
    NonFiniteGradient { group: &'static str, index: usize },

    #[error("non-finite parameter in group `{group}` at index {index} after update")]
    NonFiniteParameter { group: &'static str, index: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("shape mismatch: expected (H={expected_hidden}, D={expected_input}), got (H={hidden}, D={input})")]
    ShapeMismatch {
        expected_hidden: usize,
        expected_input: usize,
        hidden: usize,
        input: usize,
    },

    #[error("input vector has length {got}, model expects {expected}")]
    InputWidth { expected: usize, got: usize },

    #[error("R² is undefined for constant targets")]
    ConstantTargets,

    #[error("normalizer needs at least two distinct values")]
    ConstantSeries,

    #[error("series of {len} points is too short for {n_contexts} contexts with window {window} and seq_len {seq_len}")]
    TooShort {
        len: usize,
        n_contexts: usize,
        window: usize,
        seq_len: usize,
    },

    #[error("context id {got} must exceed the last consolidated id {last}")]
    OutOfOrderContext { got: usize, last: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: expected at least 2 data rows, found {rows}")]
    TooFewRows { path: PathBuf, rows: usize },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("context {context}, epoch {epoch}: {source}")]
    Training {
        context: usize,
        epoch: usize,
        #[source]
        source: Box<CelError>,
    },

    #[error("context {context}: {source}")]
    Evaluation {
        context: usize,
        #[source]
        source: Box<CelError>,
    },
}

impl CelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CelError::Io {
            path: path.into(),
            source,
        }
    }
}
