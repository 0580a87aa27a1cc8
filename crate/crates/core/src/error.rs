//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv record {record}: {msg}")]
    Csv { record: usize, msg: String },

    #[error("label column {0:?} not found in header")]
    LabelColumnNotFound(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The insertion cap was hit mid-operation. `charged` reports how many
    /// units the failing operation managed to charge before giving up, so
    /// callers can keep their own accounting exact.
    #[error("insertion budget exhausted after {charged} insertions")]
    BudgetExhausted { charged: u64 },

    #[error("histogram is empty; nothing to scan")]
    EmptyHistogram,

    #[error("mass vector sums to {0}, expected 1 within tolerance")]
    MassMismatch(f64),

    #[error("regression theta carries no tail moments; covariance is undefined")]
    MissingTailMoments,

    #[error("solver ran without instrumentation; no pull records available")]
    InstrumentationDisabled,

    #[error("out-of-bag rows are only defined relative to the patch for random-patches forests")]
    OobUndefined,

    #[error("row has {got} features, model was trained on {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        // surface underlying io failures as such; record 0 marks errors not
        // tied to a data row (header reads, writer flushes)
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            }
        } else {
            Error::Csv { record: 0, msg: e.to_string() }
        }
    }
}
