use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the layout library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("weibull fit failed: {0}")]
    WeibullFit(String),

    #[error("all sectors with data are degenerate; cannot build a wind rose")]
    DegenerateRose,

    #[error("no feasible layout for {n_turbines} turbines after {attempts} attempts")]
    Infeasible { n_turbines: usize, attempts: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("delaunay triangulation needs at least three non-collinear points")]
    Collinear,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
