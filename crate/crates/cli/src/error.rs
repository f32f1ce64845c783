use std::path::PathBuf;

use cel_core::CelError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[source] CelError),

    #[error("data error: {0}")]
    Data(#[source] CelError),

    #[error("numeric error: {0}")]
    Numeric(#[source] CelError),

    #[error("io error: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error("json error: {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("grid search: every cell failed")]
    AllCellsFailed,

    #[error("invalid argument: {0}")]
    Usage(String),
}

impl HarnessError {
    /// Short machine-readable category printed with every failure.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Data(_) => "data",
            HarnessError::Numeric(_) => "numeric",
            HarnessError::Io { .. } => "io",
            HarnessError::Artifact(_) => "artifact",
            HarnessError::Json { .. } => "json",
            HarnessError::AllCellsFailed => "grid",
            HarnessError::Usage(_) => "usage",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

fn root(e: &CelError) -> &CelError {
    match e {
        CelError::Training { source, .. } | CelError::Evaluation { source, .. } => root(source),
        other => other,
    }
}

impl From<CelError> for HarnessError {
    fn from(e: CelError) -> Self {
        match root(&e) {
            CelError::Config(_) => HarnessError::Config(e),
            CelError::Io { .. }
            | CelError::MalformedRow { .. }
            | CelError::TooFewRows { .. }
            | CelError::TooShort { .. }
            | CelError::ConstantSeries
            | CelError::ConstantTargets
            | CelError::Snapshot(_) => HarnessError::Data(e),
            _ => HarnessError::Numeric(e),
        }
    }
}
