use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by what the CLI should report: usage problems exit
/// with code 2, data/schema problems with 3, and runtime failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("class {class:?} has {count} members, fewer than {k} folds")]
    TooFewPerClass { class: String, count: usize, k: usize },

    #[error("model does not match the dataset schema: {0}")]
    ModelSchemaMismatch(String),

    #[error("unknown instance id {0}")]
    UnknownInstance(usize),

    #[error("instance is already classified as the target class")]
    AlreadyTarget,

    #[error("ideal intervention cost is zero; relative cost is undefined")]
    ZeroIdealCost,

    #[error("statistical group is degenerate: {0}")]
    DegenerateGroup(String),

    #[error("external predictor protocol error: {0}")]
    Protocol(String),

    #[error("external predictor process error: {0}")]
    Process(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI uses for this error: 2 usage, 3 data/schema, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) => 2,
            Io { .. } | Parse { .. } | SchemaViolation(_) | DegenerateData(_)
            | TooFewPerClass { .. } | ModelSchemaMismatch(_) | UnknownInstance(_)
            | AlreadyTarget => 3,
            ZeroIdealCost | DegenerateGroup(_) | Protocol(_) | Process(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
