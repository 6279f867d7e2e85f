//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty span [{start}, {end})")]
    EmptySpan { start: usize, end: usize },

    #[error("span [{start}, {end}) out of bounds for {len} tokens")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("token sequence invalid: {0}")]
    InvalidTokens(String),

    #[error("no admissible spans for a {len}-token sequence under span sizes [{min}, {max}]")]
    NoAdmissibleSpans { len: usize, min: usize, max: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate variance in {0}")]
    DegenerateVariance(&'static str),

    #[error("correlation out of open interval (-1, 1): {0}")]
    CorrelationOutOfRange(f64),

    #[error("sample count {0} too small (need at least {1})")]
    SampleTooSmall(usize, usize),

    #[error("{path}:{line}: {message}")]
    DataFormat {
        path: String,
        line: usize,
        message: String,
    },

    #[error("file format error: {0}")]
    FileFormat(String),

    #[error("external encoder protocol: {0}")]
    Protocol(String),

    #[error("encoder failure for record {record_id}: {source}")]
    RecordFailed {
        record_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("report inputs disagree: {0}")]
    ReportMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
