//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input violated a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally invalid argument (wrong length, non-finite value, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Geometry the mesh layer does not support.
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// Mesh size exceeded the configured resource limit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Non-finite entries or element-quality failures during assembly.
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Linear solver failed to converge.
    #[error("linear solve failed after {iterations} iterations (relative residual {residual:.3e}, method {method})")]
    Solver {
        iterations: usize,
        residual: f64,
        method: &'static str,
    },

    /// Conflicting or inconsistent boundary constraints.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Scenario document failed schema or invariant validation.
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    /// Staggered step gave up before reaching the tolerance.
    #[error("step {step} failed at t = {time:.6e}: {message}")]
    StepFailure {
        step: usize,
        time: f64,
        message: String,
    },

    #[error("I/O error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Broken internal invariant; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
