use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The support of the matrix contains a directed cycle. `cycle` lists the
    /// nodes in traversal order, without repeating the first node.
    #[error("graph is cyclic (cycle through nodes {cycle:?})")]
    Cyclic { cycle: Vec<usize> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Matrix outside the domain of a log-determinant acyclicity function.
    #[error("outside acyclicity domain: {0}")]
    Domain(String),

    #[error("step-halving failed to re-enter the acyclicity domain after {halvings} halvings")]
    DomainUnrecoverable { halvings: usize },

    #[error("unstable time-series model: companion spectral radius {rho:.6} >= 1")]
    Unstable { rho: f64 },

    #[error("quantity undefined: {0}")]
    Undefined(String),

    #[error("config schema error: unknown keys [{}]", .keys.join(", "))]
    UnknownKeys { keys: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
