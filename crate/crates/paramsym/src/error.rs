//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grammar error at {path}: {message}")]
    Grammar { path: String, message: String },

    #[error("homogeneity check failed: max deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    Homogeneity { deviation: f64, tolerance: f64 },

    #[error("not a weighted Taylor function: {0}")]
    NotTaylor(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("no admissible excision scale up to {limit:e} for part {index}")]
    Schedule { index: usize, limit: f64 },

    #[error("symbol is not elliptic: {0}")]
    NotElliptic(String),

    #[error("parametrix defect decays with slope {slope:.3}, expected at least {required:.3}")]
    Convergence { slope: f64, required: f64 },

    #[error("quadrature reached error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("divergent sum: {0}")]
    Divergence(String),

    #[error("coefficients depend on the sector angle: spread {spread:.3e}")]
    Sector { spread: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    pub fn grammar(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Grammar { path: path.into(), message: message.into() }
    }

    /// Stable identifier used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::Grammar { .. } => "GrammarError",
            Error::Homogeneity { .. } => "HomogeneityError",
            Error::NotTaylor(_) => "NotTaylorError",
            Error::Argument(_) => "ArgumentError",
            Error::Schedule { .. } => "ScheduleError",
            Error::NotElliptic(_) => "NotElliptic",
            Error::Convergence { .. } => "ConvergenceError",
            Error::Quadrature { .. } => "QuadratureError",
            Error::Divergence(_) => "DivergenceError",
            Error::Sector { .. } => "SectorError",
            Error::Data(_) => "DataError",
            Error::GridMismatch(_) => "GridMismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
