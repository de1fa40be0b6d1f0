use thiserror::Error;

/// Errors surfaced by every layer of the toolkit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("divisor enclosure straddles zero")]
    DivisorStraddlesZero,
    #[error("square root of an enclosure containing negative numbers")]
    SqrtOfNegative,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("series does not decay: {0}")]
    NoDecay(String),
    #[error("insufficient precision: about {required_digits} digits required")]
    InsufficientPrecision { required_digits: u32 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error in {location}: {message}")]
    Schema { location: String, message: String },
    #[error("duplicate identity id `{0}`")]
    DuplicateId(String),
    #[error("unknown identity id `{0}`")]
    UnknownId(String),
    #[error("inconsistent result: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
