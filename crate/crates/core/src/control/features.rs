use serde::{Deserialize, Serialize};

use crate::flow::FlowRecord;

pub const N_FEATURES: usize = 8;
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "duration_us",
    "pkt_rate",
    "byte_rate",
    "mean_payload",
    "payload_span",
    "mean_iat_us",
    "iat_var_us2",
    "pkt_count",
];

/// Per-flow feature tuple, in the order of [`FEATURE_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn duration_us(&self) -> f64 {
        self.0[0]
    }
    pub fn pkt_rate(&self) -> f64 {
        self.0[1]
    }
    pub fn byte_rate(&self) -> f64 {
        self.0[2]
    }
    pub fn mean_payload(&self) -> f64 {
        self.0[3]
    }
    pub fn payload_span(&self) -> f64 {
        self.0[4]
    }
    pub fn mean_iat_us(&self) -> f64 {
        self.0[5]
    }
    pub fn iat_var_us2(&self) -> f64 {
        self.0[6]
    }
    pub fn pkt_count(&self) -> f64 {
        self.0[7]
    }
}

pub fn compose_features(r: &FlowRecord) -> FeatureVector {
    let n = r.pkt_count.max(1) as f64;
    let duration = r.duration_us().max(1) as f64;
    let secs = duration / 1e6;
    let (mean_iat, iat_var) = if r.pkt_count >= 2 {
        let m = r.sum_iat_us as f64 / (n - 1.0);
        (m, (r.sum_iat_sq_us as f64 / (n - 1.0) - m * m).max(0.0))
    } else {
        (0.0, 0.0)
    };
    FeatureVector([
        duration,
        n / secs,
        r.byte_count as f64 / secs,
        r.payload_bytes as f64 / n,
        (r.max_payload - r.min_payload) as f64,
        mean_iat,
        iat_var,
        n,
    ])
}
