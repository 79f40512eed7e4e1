use thiserror::Error;

/// Errors raised by ingestion, estimation and inference.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: cannot read `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty window at t={t}, z={z:?}")]
    EmptyWindow { t: f64, z: Option<f64> },

    #[error("empty level: no subject at modifier level {level}")]
    EmptyLevel { level: f64 },

    #[error("singular fit at t={t}, z={z:?} (reciprocal condition {rcond:.3e})")]
    SingularFit { t: f64, z: Option<f64>, rcond: f64 },

    #[error("bandwidth grid too narrow: every candidate skips more than half of the prediction points; smallest viable candidate {suggestion}")]
    GridTooNarrow { suggestion: String },

    #[error("{missing} of {total} grid points missing (limit 20%)")]
    TooManyMissing { missing: usize, total: usize },

    #[error("all grid points excluded from the supremum (zero bootstrap spread)")]
    AllPointsExcluded,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::EmptyWindow { .. } => "empty_window",
            Error::EmptyLevel { .. } => "empty_level",
            Error::SingularFit { .. } => "singular_fit",
            Error::GridTooNarrow { .. } => "grid_too_narrow",
            Error::TooManyMissing { .. } => "too_many_missing",
            Error::AllPointsExcluded => "all_points_excluded",
            Error::Quadrature(_) => "quadrature",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of a single local fit, which callers may treat as a gap.
    pub fn is_local_fit_failure(&self) -> bool {
        matches!(
            self,
            Error::EmptyWindow { .. } | Error::EmptyLevel { .. } | Error::SingularFit { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
