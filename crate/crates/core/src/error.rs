use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("singular matrix")]
    Singular,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("sampler exhausted after {attempts} attempts; unsatisfiable guard: {guard}")]
    GuardExhausted { guard: String, attempts: usize },
    #[error("shift applied to non-diagonal space {0}")]
    NonDiagonalShift(usize),
    #[error("space {0} has no spectral symbol")]
    NoSpectralSymbol(usize),
    #[error("slot collision or out-of-range slot: {0}")]
    Slot(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("operator cannot be rendered symbolically: {0}")]
    NotMaterializable(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
