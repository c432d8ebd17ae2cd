use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    /// AUC is undefined when only one class is present.
    #[error("undefined AUC: {0}")]
    UndefinedAuc(String),

    /// The attack could not produce an update (e.g. a zero gradient cannot be normalized).
    #[error("degenerate attack: {0}")]
    DegenerateAttack(String),
}

pub type Result<T> = std::result::Result<T, Error>;
