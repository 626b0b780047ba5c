use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Fixed CSV header of [`MetricsReport`]; the config echo is JSON-only.
pub const METRICS_CSV_HEADER: &str = "pipeline,tp,fp,tn,fn,units,accuracy,precision,recall,fpr,\
detection_delay_windows,detection_delay_packets,peak_packet_ops,peak_close_ops,wall_clock_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Outcome of one experiment. Ratios with an empty denominator are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pipeline: String,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Evaluated windows (entropy) or reported flow records (classifier).
    pub units: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub detection_delay_windows: Option<u64>,
    pub detection_delay_packets: Option<u64>,
    pub peak_packet_ops: Option<u32>,
    pub peak_close_ops: Option<u32>,
    pub wall_clock_s: f64,
    pub config: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn from_confusion(pipeline: &str, c: Confusion, config: BTreeMap<String, String>) -> Self {
        MetricsReport {
            pipeline: pipeline.to_string(),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            units: c.total(),
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            fpr: ratio(c.fp, c.fp + c.tn),
            detection_delay_windows: None,
            detection_delay_packets: None,
            peak_packet_ops: None,
            peak_close_ops: None,
            wall_clock_s: 0.0,
            config,
        }
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        MetricsReport { wall_clock_s: 0.0, ..self.clone() } == MetricsReport { wall_clock_s: 0.0, ..other.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Format(e.to_string()))
    }

    fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<u64>| v.map_or_else(String::new, |v| v.to_string());
        vec![
            self.pipeline.clone(),
            self.tp.to_string(),
            self.fp.to_string(),
            self.tn.to_string(),
            self.fn_.to_string(),
            self.units.to_string(),
            self.accuracy.to_string(),
            self.precision.to_string(),
            self.recall.to_string(),
            self.fpr.to_string(),
            opt(self.detection_delay_windows),
            opt(self.detection_delay_packets),
            opt(self.peak_packet_ops.map(u64::from)),
            opt(self.peak_close_ops.map(u64::from)),
            self.wall_clock_s.to_string(),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(METRICS_CSV_HEADER.split(',')).expect("in-memory write");
        w.write_record(self.csv_fields()).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Parses the CSV form; the config echo is not part of it and comes
    /// back empty.
    pub fn from_csv(s: &str) -> Result<Self, HarnessError> {
        let fmt = |m: String| HarnessError::Format(m);
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(s.as_bytes());
        let mut rows = r.records();
        let header = rows.next().ok_or_else(|| fmt("empty metrics csv".into()))?.map_err(|e| fmt(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != METRICS_CSV_HEADER {
            return Err(fmt("unexpected metrics header".into()));
        }
        let row = rows.next().ok_or_else(|| fmt("missing metrics row".into()))?.map_err(|e| fmt(e.to_string()))?;
        if row.len() != 15 {
            return Err(fmt(format!("expected 15 fields, got {}", row.len())));
        }
        fn num<T: std::str::FromStr>(s: &str) -> Result<T, HarnessError> {
            s.parse().map_err(|_| HarnessError::Format(format!("bad number {s:?}")))
        }
        fn opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>, HarnessError> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        Ok(MetricsReport {
            pipeline: row[0].to_string(),
            tp: num(&row[1])?,
            fp: num(&row[2])?,
            tn: num(&row[3])?,
            fn_: num(&row[4])?,
            units: num(&row[5])?,
            accuracy: num(&row[6])?,
            precision: num(&row[7])?,
            recall: num(&row[8])?,
            fpr: num(&row[9])?,
            detection_delay_windows: opt(&row[10])?,
            detection_delay_packets: opt(&row[11])?,
            peak_packet_ops: opt(&row[12])?,
            peak_close_ops: opt(&row[13])?,
            wall_clock_s: num(&row[14])?,
            config: BTreeMap::new(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(format!("unknown format {s:?} (expected json or csv)")),
        }
    }
}

pub fn emit_metrics(r: &MetricsReport, path: &Path, format: OutputFormat) -> Result<(), HarnessError> {
    let body = match format {
        OutputFormat::Json => r.to_json() + "\n",
        OutputFormat::Csv => r.to_csv(),
    };
    std::fs::write(path, body).map_err(|source| HarnessError::Io { path: path.to_owned(), source })
}
