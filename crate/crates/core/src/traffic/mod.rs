//! Labeled packet traces: CSV ingestion, synthetic benign traffic and
//! spoofed-source attack injection.

mod csv_io;
mod synth;

pub use csv_io::{load_trace, read_trace, write_trace, TRACE_HEADER, TRACE_HEADER_LABELED};
pub use synth::{
    generate_benign, ground_truth_windows, inject_attack, AttackSpec, BenignGenerator, SyntheticConfig,
};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Ddos,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Benign),
            1 => Some(Label::Ddos),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "benign",
            Label::Ddos => "ddos",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub ts_us: u64,
    pub key: FlowKey,
    pub payload_len: u16,
    pub label: Option<Label>,
}

impl TraceRecord {
    pub fn is_attack(&self) -> bool {
        self.label == Some(Label::Ddos)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: timestamp {current} precedes {previous}")]
    Order { line: u64, previous: u64, current: u64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
