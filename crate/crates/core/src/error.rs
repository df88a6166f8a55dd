use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a discriminant (must be nonzero and 0 or 1 mod 4)")]
    NotADiscriminant(i64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{nprime} is not an exact divisor of {level}")]
    NotExactDivisor { nprime: i64, level: i64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("missing coefficient for form [{a}, {b}, {c}] (disc {disc})")]
    MissingCoefficient { a: i64, b: i64, c: i64, disc: i64 },
    #[error("insufficient coefficients: need {required}, have {available}")]
    InsufficientCoefficients { required: usize, available: usize },
    #[error("root number unknown")]
    UnknownRootNumber,
    #[error("missing Euler factor at p = {0}")]
    MissingEulerFactor(u64),
    #[error("{0} is a bad prime; use the bad-prime routine")]
    BadPrime(u64),
    #[error("all grid cells are degenerate")]
    AllCellsDegenerate,
    #[error("unknown curve label {0}")]
    UnknownCurve(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
