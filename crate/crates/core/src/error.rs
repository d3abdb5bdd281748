use thiserror::Error;

/// Errors raised by the library. Every variant is a domain error: the input
/// was well-formed but violates a model precondition.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval {name}: [{lo}, {hi}]")]
    InvalidInterval { name: String, lo: f64, hi: f64 },

    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: String, detail: String },

    #[error("value {value} for {name} lies outside [{lo}, {hi}]")]
    OutOfBox {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("length mismatch for {name}: expected {expected}, got {got}")]
    LengthMismatch {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("missing variable {0} in assignment")]
    MissingVariable(String),

    #[error("unknown variable {0}")]
    UnknownVariable(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("budget: {0}")]
    Budget(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("schema violations:\n{0}")]
    Schema(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),

    #[error("solver bridge: {0}")]
    Solver(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, detail: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        detail: detail.into(),
    }
}
