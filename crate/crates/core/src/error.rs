use thiserror::Error;

/// Errors raised by the library. The CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum QtdaError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("inconsistent dimension: row {row} has {found} coordinates, expected {expected}")]
    Dimension {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("coordinate {value} at row {row} is not representable in {bits} bits with {frac_bits} fraction bits")]
    Representability {
        row: usize,
        value: f64,
        bits: u32,
        frac_bits: u32,
    },

    #[error("fixed-point overflow while computing squared distance between points {0} and {1}")]
    Overflow(usize, usize),

    #[error("arithmetic overflow in exact elimination")]
    ExactOverflow,

    #[error("invalid simplex: {0}")]
    InvalidSimplex(String),

    #[error("complexes are not nested: {0}")]
    NotNested(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QtdaError>;
