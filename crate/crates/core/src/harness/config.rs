use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dataplane::FixedPoint;
use crate::detector::{AlarmPolicy, DetectorConfig, WindowConfig};
use crate::entropy::SketchDims;
use crate::flow::FlowKey;
use crate::traffic::{AttackSpec, SyntheticConfig};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Entropy,
    Classifier,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Entropy => "entropy",
            Pipeline::Classifier => "classifier",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceSource {
    Synthetic,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub knn_k: usize,
    /// Tree JSON files; when non-empty the compiled forest replaces KNN.
    pub trees: Vec<PathBuf>,
    pub quant_bits: u32,
    pub flow_window_us: u64,
    pub flow_slot_bits: u32,
    /// Seed of the synthetic training trace.
    pub train_seed: u64,
}

/// Everything one experiment needs; see [`ExperimentConfig::parse`] for the
/// file format and [`KEYS`] for the accepted keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub trace: TraceSource,
    pub synthetic: SyntheticConfig,
    pub attack: AttackSpec,
    pub detector: DetectorConfig,
    pub classifier: ClassifierParams,
    pub alarm_log: Option<PathBuf>,
    pub seed: u64,
}

/// Accepted configuration keys.
pub const KEYS: &[&str] = &[
    "pipeline",
    "trace",
    "seed",
    "hosts",
    "servers",
    "zipf_s",
    "pps",
    "duration_s",
    "attack_fraction",
    "attack_onset",
    "attack_dst",
    "attack_dst_port",
    "attack_proto",
    "window_log2",
    "warmup_windows",
    "alpha_shift",
    "k",
    "min_margin",
    "policy",
    "sketch_rows",
    "sketch_cols",
    "exact_counting",
    "msb_kept",
    "log_table_max",
    "packet_op_limit",
    "close_op_limit",
    "knn_k",
    "trees",
    "quant_bits",
    "flow_window_us",
    "flow_slot_bits",
    "train_seed",
    "alarm_log",
];

const TRAIN_SALT: u64 = 0x7472_6169_6e00_0000;

impl ExperimentConfig {
    /// Defaults: the entropy pipeline runs a 10^6-packet trace with a 4%
    /// attack starting halfway; the classifier pipeline a small trace with
    /// a 20% attack throughout.
    pub fn defaults(pipeline: Pipeline) -> Self {
        let (synthetic, fraction, onset) = match pipeline {
            Pipeline::Entropy => (
                SyntheticConfig {
                    n_benign_hosts: 1000,
                    n_servers: 1 << 18,
                    zipf_s: 1.0,
                    pkts_per_second: 10_000.0,
                    duration_s: 98.0,
                    seed: 0,
                },
                0.04,
                0.5,
            ),
            Pipeline::Classifier => (
                SyntheticConfig {
                    n_benign_hosts: 200,
                    n_servers: 50,
                    zipf_s: 1.0,
                    pkts_per_second: 2000.0,
                    duration_s: 20.0,
                    seed: 0,
                },
                0.2,
                0.0,
            ),
        };
        ExperimentConfig {
            pipeline,
            trace: TraceSource::Synthetic,
            synthetic,
            attack: AttackSpec { onset, ..AttackSpec::new(fraction, AttackSpec::default_target()) },
            detector: DetectorConfig::default(),
            classifier: ClassifierParams {
                knn_k: 5,
                trees: Vec::new(),
                quant_bits: 8,
                flow_window_us: 1_000_000,
                flow_slot_bits: 16,
                train_seed: TRAIN_SALT,
            },
            alarm_log: None,
            seed: 0,
        }
        .with_seed(0)
    }

    /// Sets the master seed and everything derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synthetic.seed = seed;
        self.detector.seed = seed;
        self.classifier.train_seed = seed ^ TRAIN_SALT;
        self
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::load_for(path, Pipeline::Entropy)
    }

    /// As [`load`](Self::load), with `pipeline` assumed when the file has
    /// no `pipeline` key.
    pub fn load_for(path: &Path, pipeline: Pipeline) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_for(&text, pipeline)
    }

    /// Parses flat `key = value` text. `#` starts a comment; blank lines
    /// are ignored; keys may appear once. `pipeline` picks the defaults the
    /// other keys override, and `seed` is applied before any `train_seed`.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        Self::parse_for(text, Pipeline::Entropy)
    }

    pub fn parse_for(text: &str, default_pipeline: Pipeline) -> Result<Self, HarnessError> {
        let mut kv: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(HarnessError::Config(format!("line {}: unknown key {k:?}", i + 1)));
            }
            if kv.iter().any(|(_, k2, _)| *k2 == k) {
                return Err(HarnessError::Config(format!("line {}: duplicate key {k:?}", i + 1)));
            }
            kv.push((i + 1, k, v));
        }
        let get = |name: &str| kv.iter().find(|(_, k, _)| k == name);
        let pipeline = match get("pipeline").map(|(_, _, v)| v.as_str()) {
            None => default_pipeline,
            Some("entropy") => Pipeline::Entropy,
            Some("classifier") => Pipeline::Classifier,
            Some(other) => return Err(HarnessError::Config(format!("unknown pipeline {other:?}"))),
        };
        let mut cfg = Self::defaults(pipeline);
        if let Some((line, _, v)) = get("seed") {
            cfg = cfg.with_seed(parse_num(*line, "seed", v)?);
        }
        for (line, k, v) in &kv {
            cfg.set(*line, k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), HarnessError> {
        let n = |name| -> Result<u64, HarnessError> { parse_num(line, name, v) };
        let f = |name| -> Result<f64, HarnessError> { parse_num(line, name, v) };
        let small = |name| -> Result<u32, HarnessError> { parse_num(line, name, v) };
        match key {
            "pipeline" | "seed" => {}
            "trace" => {
                self.trace = if v == "synthetic" { TraceSource::Synthetic } else { TraceSource::File(v.into()) }
            }
            "hosts" => self.synthetic.n_benign_hosts = small(key)?,
            "servers" => self.synthetic.n_servers = small(key)?,
            "zipf_s" => self.synthetic.zipf_s = f(key)?,
            "pps" => self.synthetic.pkts_per_second = f(key)?,
            "duration_s" => self.synthetic.duration_s = f(key)?,
            "attack_fraction" => self.attack.fraction = f(key)?,
            "attack_onset" => self.attack.onset = f(key)?,
            "attack_dst" => {
                let ip: std::net::Ipv4Addr =
                    v.parse().map_err(|_| HarnessError::Config(format!("line {line}: bad attack_dst {v:?}")))?;
                self.attack.target.dst_ip = ip.into();
            }
            "attack_dst_port" => self.attack.target.dst_port = parse_num(line, key, v)?,
            "attack_proto" => self.attack.target.proto = parse_num(line, key, v)?,
            "window_log2" => self.detector.window.window_log2 = small(key)?,
            "warmup_windows" => self.detector.window.warmup_windows = small(key)?,
            "alpha_shift" => self.detector.alpha_shift = small(key)?,
            "k" => {
                let k = f(key)?;
                if !(0.0..=1000.0).contains(&k) {
                    return Err(HarnessError::Config(format!("line {line}: k must be in [0, 1000]")));
                }
                self.detector.k = FixedPoint::from_raw((k * 16.0).round() as i32);
            }
            "min_margin" => {
                let d = f(key)?;
                if !(0.0..=64.0).contains(&d) {
                    return Err(HarnessError::Config(format!("line {line}: min_margin must be in [0, 64]")));
                }
                self.detector.min_margin = FixedPoint::from_raw((d * 16.0).round() as i32);
            }
            "policy" => {
                self.detector.policy = match v {
                    "and" => AlarmPolicy::And,
                    "or" => AlarmPolicy::Or,
                    _ => return Err(HarnessError::Config(format!("line {line}: policy must be and|or"))),
                }
            }
            "sketch_rows" => self.detector.sketch.rows = n(key)? as usize,
            "sketch_cols" => self.detector.sketch.cols = n(key)? as usize,
            "exact_counting" => self.detector.exact_counting = parse_num(line, key, v)?,
            "msb_kept" => self.detector.msb_kept = small(key)?,
            "log_table_max" => self.detector.log_table_max = small(key)?,
            "packet_op_limit" => self.detector.packet_op_limit = small(key)?,
            "close_op_limit" => self.detector.close_op_limit = small(key)?,
            "knn_k" => self.classifier.knn_k = n(key)? as usize,
            "trees" => self.classifier.trees = v.split(',').map(|p| PathBuf::from(p.trim())).collect(),
            "quant_bits" => self.classifier.quant_bits = small(key)?,
            "flow_window_us" => self.classifier.flow_window_us = n(key)?,
            "flow_slot_bits" => self.classifier.flow_slot_bits = small(key)?,
            "train_seed" => self.classifier.train_seed = n(key)?,
            "alarm_log" => self.alarm_log = Some(v.into()),
            _ => unreachable!("key list checked"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg_err = |m: String| Err(HarnessError::Config(m));
        self.detector.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.synthetic.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.attack.fraction) {
            return cfg_err(format!("attack_fraction {} outside [0, 1)", self.attack.fraction));
        }
        if !(0.0..1.0).contains(&self.attack.onset) {
            return cfg_err(format!("attack_onset {} outside [0, 1)", self.attack.onset));
        }
        if let TraceSource::File(p) = &self.trace {
            if !p.is_file() {
                return cfg_err(format!("trace file {} does not exist", p.display()));
            }
        }
        let c = &self.classifier;
        if c.knn_k == 0 {
            return cfg_err("knn_k must be at least 1".into());
        }
        if !(1..=16).contains(&c.quant_bits) {
            return cfg_err(format!("quant_bits {} outside 1..=16", c.quant_bits));
        }
        if c.flow_window_us == 0 {
            return cfg_err("flow_window_us must be positive".into());
        }
        if !(1..=24).contains(&c.flow_slot_bits) {
            return cfg_err(format!("flow_slot_bits {} outside 1..=24", c.flow_slot_bits));
        }
        if let Some(p) = c.trees.iter().find(|p| !p.is_file()) {
            return cfg_err(format!("tree file {} does not exist", p.display()));
        }
        Ok(())
    }

    /// Effective settings as key/value strings, echoed into metrics.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let d = &self.detector;
        let s = &self.synthetic;
        let t: FlowKey = self.attack.target;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("pipeline", self.pipeline.name().into());
        put(
            "trace",
            match &self.trace {
                TraceSource::Synthetic => "synthetic".into(),
                TraceSource::File(p) => p.display().to_string(),
            },
        );
        put("seed", self.seed.to_string());
        put("hosts", s.n_benign_hosts.to_string());
        put("servers", s.n_servers.to_string());
        put("zipf_s", s.zipf_s.to_string());
        put("pps", s.pkts_per_second.to_string());
        put("duration_s", s.duration_s.to_string());
        put("attack_fraction", self.attack.fraction.to_string());
        put("attack_onset", self.attack.onset.to_string());
        put("attack_dst", std::net::Ipv4Addr::from(t.dst_ip).to_string());
        put("attack_dst_port", t.dst_port.to_string());
        put("attack_proto", t.proto.to_string());
        match self.pipeline {
            Pipeline::Entropy => {
                put("window_log2", d.window.window_log2.to_string());
                put("warmup_windows", d.window.warmup_windows.to_string());
                put("alpha_shift", d.alpha_shift.to_string());
                put("k", d.k.to_string());
                put("min_margin", d.min_margin.to_string());
                put("policy", format!("{:?}", d.policy).to_lowercase());
                put("sketch_rows", d.sketch.rows.to_string());
                put("sketch_cols", d.sketch.cols.to_string());
                put("exact_counting", d.exact_counting.to_string());
                put("msb_kept", d.msb_kept.to_string());
                put("log_table_max", d.log_table_max.to_string());
                put("packet_op_limit", d.packet_op_limit.to_string());
                put("close_op_limit", d.close_op_limit.to_string());
            }
            Pipeline::Classifier => {
                let c = &self.classifier;
                put("knn_k", c.knn_k.to_string());
                put(
                    "trees",
                    c.trees.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
                );
                put("quant_bits", c.quant_bits.to_string());
                put("flow_window_us", c.flow_window_us.to_string());
                put("flow_slot_bits", c.flow_slot_bits.to_string());
                put("train_seed", c.train_seed.to_string());
            }
        }
        m
    }

    pub fn window(&self) -> WindowConfig {
        self.detector.window
    }

    pub fn sketch(&self) -> SketchDims {
        self.detector.sketch
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse().map_err(|_| HarnessError::Config(format!("line {line}: bad value {v:?} for {key}")))
}
