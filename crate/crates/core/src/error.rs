use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid coefficient field: {0}")]
    InvalidField(String),

    #[error("raster {path}: line {line}: {msg}")]
    Raster {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("wavelet: {0}")]
    Wavelet(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigensolver failed on neighborhood {neighborhood}: {msg}")]
    Eigen { neighborhood: usize, msg: String },

    #[error("degenerate weighted source on neighborhood {neighborhood}: integral of the weighted coefficient is zero")]
    DegenerateSource { neighborhood: usize },

    #[error("reduced system is numerically singular; dependent basis indices {indices:?}")]
    Singular { indices: Vec<usize> },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
