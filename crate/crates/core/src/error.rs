use std::path::PathBuf;

/// Errors raised by every stage of the pipeline.
///
/// The `module` fields name the stage that failed so batch logs can be
/// traced back without a backtrace.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{module}: resource limit exceeded: {detail}")]
    ResourceLimit { module: &'static str, detail: String },

    #[error("{module}: invalid parameter: {detail}")]
    Parameter { module: &'static str, detail: String },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant { invariant: &'static str, detail: String },

    #[error("{module}: validation failed: {detail}")]
    Validation { module: &'static str, detail: String },

    #[error("{module}: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { module: &'static str, expected: usize, got: usize },

    #[error("{module}: matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    Definiteness { module: &'static str, row: usize, pivot: f64 },

    #[error("mountain pass geometry failure: path maximum at {endpoint} endpoint")]
    Geometry { endpoint: &'static str },

    #[error("{module}: {detail}")]
    DivisionGuard { module: &'static str, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter { module, detail: detail.into() }
    }

    pub(crate) fn validation(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation { module, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub(crate) fn check_dim(module: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { module, expected, got });
    }
    Ok(())
}
