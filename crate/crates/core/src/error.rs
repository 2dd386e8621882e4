use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateCap { states: u128, cap: u128 },
    #[error("positivity precondition violated: {0}")]
    NotPositive(String),
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("rejection budget exhausted: {0}")]
    RejectionBudget(String),
    #[error("operator is defective: {0}")]
    Defective(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("query cap of {0} exceeded")]
    QueryCap(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
