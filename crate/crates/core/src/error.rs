use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("basis truncation p_max={p_max}, l_max={l_max} exceeds grid resolution ({n_r} x {n_theta})")]
    TruncationExceedsGrid {
        p_max: usize,
        l_max: usize,
        n_r: usize,
        n_theta: usize,
    },

    #[error("winding shift {shift} cannot be represented on a grid with {n_theta} azimuthal nodes for l_max={l_max}")]
    WindingOutOfRange { shift: i32, l_max: usize, n_theta: usize },

    #[error("empty mode target")]
    EmptyTarget,

    #[error("mode target carries zero power")]
    ZeroPower,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("histogram layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("zero reference counts in the input window")]
    ZeroReference,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output verification failed for {path}: {message}")]
    Verify { path: PathBuf, message: String },
}

impl Error {
    /// A [`Error::Config`] at a dotted field path.
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// An [`Error::Io`] tagged with the path involved.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
