//! Per-flow feature collection and the switch-to-controller report format.

mod key;
mod report;
mod table;

pub use key::FlowKey;
pub use report::{read_report_stream, write_report_stream, DeltaTracker, FlowRecord, ReportPacket};
pub use table::{header_len, FlowCollector, FlowDescriptor, FlowTable, PROTO_TCP, PROTO_UDP};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("malformed report: {0}")]
    Format(String),
    #[error("report length mismatch: expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("unsupported report version {0}")]
    Version(u8),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("timestamps out of order: {current} after {previous}")]
    TraceOrder { previous: u64, current: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for FlowError {
    fn eq(&self, other: &Self) -> bool {
        use FlowError::*;
        match (self, other) {
            (Format(a), Format(b)) | (Argument(a), Argument(b)) => a == b,
            (Length { expected: a, actual: b }, Length { expected: c, actual: d }) => a == c && b == d,
            (Version(a), Version(b)) => a == b,
            (TraceOrder { previous: a, current: b }, TraceOrder { previous: c, current: d }) => a == c && b == d,
            (Io(a), Io(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}
