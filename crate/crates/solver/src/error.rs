use thiserror::Error;

/// Errors raised by model construction, instance I/O, and the solvers.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("constraint {row} references unknown variable index {var}")]
    UnknownVariable { row: usize, var: usize },

    #[error("variable `{name}` has invalid bounds [{lb}, {ub}]")]
    InvalidBounds { name: String, lb: f64, ub: f64 },

    #[error("integer variable `{0}` has an infinite bound")]
    UnboundedInteger(String),

    #[error("model has no variables")]
    EmptyModel,

    #[error("numerical breakdown in simplex: {0}")]
    Numerical(String),

    #[error("enumeration refused: {0}")]
    EnumerationRefused(String),

    #[error("instance format error on line {line}: {message}")]
    Instance { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;
