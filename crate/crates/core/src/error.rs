use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("point {t} lies outside the basis domain [{a}, {b}]")]
    Domain { t: f64, a: f64, b: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("unknown signal id `{0}`")]
    NotFound(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("invalid exchange: {0}")]
    Exchange(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("solver disagreement: exchange {exchange} vs lp {lp}")]
    SolverDisagreement { exchange: f64, lp: f64 },

    #[error("{0}")]
    Parse(String),
}
