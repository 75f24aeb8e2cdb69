use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sketch geometry: depth={depth}, width={width}")]
    InvalidGeometry { depth: usize, width: usize },

    #[error("non-finite {what}: {value}")]
    NumericInput { what: &'static str, value: f64 },

    #[error("incompatible sketches: {0}")]
    IncompatibleSketch(String),

    #[error("operation requires an identity sketch")]
    UnsupportedMode,

    #[error("heap is empty")]
    EmptyHeap,

    #[error("label {label} is outside the domain of the {loss} loss")]
    LabelDomain { label: f64, loss: &'static str },

    #[error("buffer budget {budget} is smaller than top-k {k}")]
    InvalidBudget { budget: usize, k: usize },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("record {record}: {source}")]
    Record {
        record: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid synthetic design: {0}")]
    InvalidSpec(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed encoding: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericInput { what, value })
    }
}
