//! Count-sketch frequency estimation and incremental Shannon entropy over
//! observation windows, with `x*log2(x)` served from an LPM table.

mod logtable;
mod pipeline;
mod sketch;

pub use logtable::LogTable;
pub use pipeline::{EntropyAccumulator, EntropyPipeline};
pub use sketch::{median, CountSketch, Estimator, ExactCounter, FrequencyEstimator, SketchDims};

use thiserror::Error;

use crate::dataplane::{BudgetViolation, DataplaneError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntropyError {
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("log table has no entry for count {0}")]
    LogTableMiss(u64),
    #[error("window holds {count} packets, expected {window}")]
    WindowIncomplete { count: u64, window: u64 },
    #[error("log table line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl From<BudgetViolation> for EntropyError {
    fn from(v: BudgetViolation) -> Self {
        EntropyError::Dataplane(v.into())
    }
}
