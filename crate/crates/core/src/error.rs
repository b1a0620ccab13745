use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("time index {t} out of range 0..={n}")]
    TimeOutOfRange { t: usize, n: usize },
    #[error("invalid step value {0}; steps must be +1 or -1")]
    InvalidStep(i64),
    #[error("walk is not reducible at scale {scale}: {reason}")]
    NotReducible { scale: u64, reason: String },
    #[error("interval index out of range: level {m}, index {j}, level length {len}")]
    IntervalOutOfRange { m: usize, j: usize, len: usize },
    #[error("level {m} out of range (top level {k})")]
    LevelOutOfRange { m: usize, k: usize },
    #[error("walk does not belong to the stopped-walk set at scale {0}")]
    NotStopped(u64),
    #[error("scenery window [{lo}, {hi}] does not cover site {site}")]
    WindowTooSmall { lo: i64, hi: i64, site: i64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("enumeration refused: predicted count bound {bound} exceeds cap {cap}")]
    CapExceeded { bound: String, cap: u64 },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
