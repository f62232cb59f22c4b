use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("point {value} lies outside the grid on axis {axis} (valid range [{lower}, {upper}))")]
    OutOfGrid {
        axis: char,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("bandwidth mismatch: expected {expected}, found {found}")]
    BandwidthMismatch { expected: usize, found: usize },

    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("alignment diverged at iteration {iteration}: cost rose for {streak} consecutive iterations")]
    Diverged { iteration: usize, streak: usize },

    #[error("joint {joint} left its limit ({value:.4} rad, limit {limit:.4} rad)")]
    JointLimit { joint: usize, value: f64, limit: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
