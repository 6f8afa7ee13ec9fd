use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("steady-state residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("Liouvillian null space is degenerate (trace distance {distance:.3e} between candidates)")]
    DegenerateNullspace { distance: f64 },

    #[error("state is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("fit did not converge: {0}")]
    FitNotConverged(String),

    #[error("parameters lie on a phase boundary: {0}")]
    PhaseBoundary(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable class used by the command-line front end.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_)
            | Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange(_) => "dimension",
            Error::InvalidParameter { .. } | Error::Configuration(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Singular(_)
            | Error::ResidualTooLarge { .. }
            | Error::DegenerateNullspace { .. }
            | Error::NotPositive { .. }
            | Error::InvalidState(_)
            | Error::StepSizeUnderflow { .. }
            | Error::FitNotConverged(_)
            | Error::PhaseBoundary(_) => "numerical",
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => "io",
        }
    }

    pub fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
