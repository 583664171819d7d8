use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Scenario or configuration inconsistency. `path` is the offending field.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Pilot Gram matrix is rank deficient and cannot be whitened.
    #[error("pilot Gram matrix of {} is singular (condition number {condition:.3e})", link_name(.link))]
    SingularPilots { link: Option<usize>, condition: f64 },

    /// A matrix that must be positive definite failed to factor.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Every mode has zero gain, any multiplier is optimal and the allocation is zero.
    #[error("degenerate power allocation: no mode has positive gain")]
    Degenerate,

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn link_name(link: &Option<usize>) -> String {
    match link {
        Some(l) => format!("link {l}"),
        None => "an unnamed link".to_string(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
