use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("timestamps not sorted: index {index} ({value} ps) precedes {previous} ps")]
    NonMonotonic { index: usize, previous: u64, value: u64 },

    #[error("timestamp {value} ps at index {index} lies outside [0, {duration}] ps")]
    OutOfRange { index: usize, value: u64, duration: u64 },

    #[error("histogram is already normalized")]
    AlreadyNormalized,

    #[error("histogram must be normalized first")]
    NotNormalized,

    #[error("histogram axes differ: {0}")]
    AxisMismatch(String),

    #[error("histogram span too small: {0}")]
    SpanTooSmall(String),

    #[error("peak windows overlap: centers {a} ps and {b} ps are closer than 2 x {window} ps")]
    OverlappingWindows { a: i64, b: i64, window: i64 },

    #[error("peak {label} at {center_ps} ps is unusable: {reason}")]
    UnusablePeak {
        label: &'static str,
        center_ps: i64,
        reason: String,
    },

    #[error("side-peak area is zero; ratio cannot be normalized")]
    ZeroSideArea,

    #[error("dip {dip:.6} lies below the physical floor {floor:.6} (statistical undershoot)")]
    BelowFloor { dip: f64, floor: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("bad magic in {path}: expected \"PHSTAMP1\"")]
    BadMagic { path: PathBuf },

    #[error("truncated stream header: {found} of {expected} bytes present")]
    TruncatedHeader { expected: usize, found: usize },

    #[error("truncated stream file: header declares {expected} timestamps, payload holds {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("stream file has {extra} trailing bytes after {count} timestamps")]
    TrailingBytes { count: u64, extra: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
