//! Experiment configuration, orchestration and metrics output.

mod config;
mod metrics;
mod run;

pub use config::{ClassifierParams, ExperimentConfig, Pipeline, TraceSource, KEYS};
pub use metrics::{emit_metrics, Confusion, MetricsReport, OutputFormat, METRICS_CSV_HEADER};
pub use run::{
    build_trace, flow_records, run_detector, run_experiment, run_experiment_with, run_many, score_windows,
    write_alarm_log, EntropyRun, WindowScore,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::control::ControlError;
use crate::detector::DetectorError;
use crate::flow::FlowError;
use crate::traffic::TraceError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed metrics: {0}")]
    Format(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }
}
