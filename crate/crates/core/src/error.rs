use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("connection radius {radius} for colors ({a}, {b}) is not below 1/2")]
    RadiusTooLarge { a: String, b: String, radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("intensity undefined for null color {0}")]
    NullColor(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("cumulant is not convex on its grid (second difference {0:e} at t = {1})")]
    NonConvex(f64, f64),

    #[error("zero inner samples requested")]
    NoSamples,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
