use thiserror::Error;

/// Errors raised by the estimators, statistics and detection routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid frequency grid: {0}")]
    Grid(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("sample too small: {0}")]
    Size(String),

    #[error("degenerate long-run variance at block {block}, frequency {omega}")]
    DegenerateVariance { block: usize, omega: f64 },

    #[error("degenerate denominator at block {block}, frequency {omega}")]
    DegenerateDenominator { block: usize, omega: f64 },

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("algorithm failure: {0}")]
    Algorithm(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
