use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::control::{compose_features, knn_train, tree_compile, DecisionTree, FeatureVector, Normalizer, N_FEATURES};
use crate::detector::{AlarmLogLine, Detector, WindowResult};
use crate::flow::{FlowCollector, FlowKey, FlowRecord, FlowTable};
use crate::par::{self, Execution};
use crate::traffic::{generate_benign, ground_truth_windows, inject_attack, load_trace, Label, TraceRecord};

use super::{Confusion, ExperimentConfig, HarnessError, MetricsReport, Pipeline, TraceSource};

const ATTACK_SALT: u64 = 0x6174_7461_636b;

/// Builds the labeled trace an experiment runs on.
pub fn build_trace(cfg: &ExperimentConfig) -> Result<Vec<TraceRecord>, HarnessError> {
    match &cfg.trace {
        TraceSource::Synthetic => synthetic_trace(cfg, cfg.synthetic.seed),
        TraceSource::File(p) => {
            let recs = load_trace(p)?;
            if recs.iter().any(|r| r.label.is_none()) {
                return Err(HarnessError::Config(format!("{}: trace has no label column", p.display())));
            }
            Ok(recs)
        }
    }
}

fn synthetic_trace(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<TraceRecord>, HarnessError> {
    let syn = crate::traffic::SyntheticConfig { seed, ..cfg.synthetic.clone() };
    let benign = generate_benign(&syn)?;
    Ok(inject_attack(&benign, &cfg.attack, seed ^ ATTACK_SALT)?)
}

/// Per-window detector output alongside ground truth.
#[derive(Clone, Debug)]
pub struct EntropyRun {
    pub windows: Vec<WindowResult>,
    pub truth: Vec<bool>,
    pub peak_packet_ops: u32,
    pub peak_close_ops: u32,
}

pub fn run_detector(cfg: &ExperimentConfig, trace: &[TraceRecord]) -> Result<EntropyRun, HarnessError> {
    let mut det = Detector::new(cfg.detector.clone())?;
    let mut windows = Vec::with_capacity(trace.len() >> cfg.detector.window.window_log2);
    for r in trace {
        if let Some(w) = det.process_packet(r.key.src_ip, r.key.dst_ip)? {
            windows.push(w);
        }
    }
    let (s, d) = det.pipelines();
    Ok(EntropyRun {
        truth: ground_truth_windows(trace, cfg.detector.window.window() as usize, cfg.attack.fraction),
        peak_packet_ops: s.peak_ops().max(d.peak_ops()),
        peak_close_ops: det.peak_close_ops(),
        windows,
    })
}

/// Window-level scoring of evaluated windows `first_evaluated..`. The delay
/// is counted from the first anomalous ground-truth window to the first
/// correct alarm at or after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowScore {
    pub confusion: Confusion,
    pub delay_windows: Option<u64>,
    pub first_alarm_window: Option<u64>,
}

pub fn score_windows(predicted: &[bool], truth: &[bool], first_evaluated: usize) -> WindowScore {
    let mut confusion = Confusion::default();
    let n = predicted.len().min(truth.len());
    for i in first_evaluated.min(n)..n {
        confusion.record(predicted[i], truth[i]);
    }
    let onset = truth[..n].iter().position(|t| *t);
    let first_alarm = onset.and_then(|o| (o..n).find(|&i| predicted[i] && truth[i]));
    WindowScore {
        confusion,
        delay_windows: onset.zip(first_alarm).map(|(o, a)| (a - o) as u64),
        first_alarm_window: first_alarm.map(|a| a as u64),
    }
}

fn run_entropy(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    let trace = build_trace(cfg)?;
    let run = run_detector(cfg, &trace)?;
    if let Some(path) = &cfg.alarm_log {
        write_alarm_log(path, run.windows.iter().filter_map(WindowResult::log_line))?;
    }
    let predicted: Vec<bool> = run.windows.iter().map(|w| w.anomalous).collect();
    let score = score_windows(&predicted, &run.truth, cfg.detector.window.warmup_windows as usize);
    let mut m = MetricsReport::from_confusion("entropy", score.confusion, cfg.echo());
    m.detection_delay_windows = score.delay_windows;
    if let Some(a) = score.first_alarm_window {
        // packets from the first attack packet to the end of the alarmed window
        let first_attack = trace.iter().position(TraceRecord::is_attack).unwrap_or(0) as u64;
        let end = (a + 1) * cfg.detector.window.window();
        m.detection_delay_packets = Some(end.saturating_sub(first_attack));
    }
    m.peak_packet_ops = Some(run.peak_packet_ops);
    m.peak_close_ops = Some(run.peak_close_ops);
    Ok(m)
}

pub fn write_alarm_log(path: &Path, lines: impl Iterator<Item = AlarmLogLine>) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_owned(), source };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for l in lines {
        serde_json::to_writer(&mut w, &l).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Replays a trace through the flow collector and returns every reported
/// flow record with its ground-truth label (ddos if any of its packets is).
pub fn flow_records(cfg: &ExperimentConfig, trace: &[TraceRecord]) -> Result<Vec<(FlowRecord, Label)>, HarnessError> {
    let c = &cfg.classifier;
    let table = FlowTable::with_slot_bits(c.flow_slot_bits, cfg.seed);
    let mut col = FlowCollector::new(table, c.flow_window_us)?;
    let mut labels: FxHashMap<FlowKey, Label> = FxHashMap::default();
    let mut reports = Vec::new();
    for r in trace {
        let l = labels.entry(r.key).or_insert(Label::Benign);
        if r.is_attack() {
            *l = Label::Ddos;
        }
        reports.extend(col.push(r.key, r.payload_len, r.ts_us)?);
    }
    reports.extend(col.finish()?);
    Ok(reports
        .iter()
        .flat_map(|rep| rep.flows.iter())
        .map(|f| (*f, labels[&f.key]))
        .collect())
}

fn run_classifier(cfg: &ExperimentConfig, exec: Execution) -> Result<MetricsReport, HarnessError> {
    let c = &cfg.classifier;
    let train_trace = synthetic_trace(cfg, c.train_seed)?;
    let train: Vec<(FeatureVector, Label)> =
        flow_records(cfg, &train_trace)?.iter().map(|(f, l)| (compose_features(f), *l)).collect();
    let test_trace = build_trace(cfg)?;
    let test = flow_records(cfg, &test_trace)?;
    let xs: Vec<FeatureVector> = test.iter().map(|(f, _)| compose_features(f)).collect();

    let predicted: Vec<Label> = if c.trees.is_empty() {
        let ds = knn_train(&train)?;
        if c.knn_k > ds.len() {
            return Err(HarnessError::Config(format!("knn_k {} exceeds {} training rows", c.knn_k, ds.len())));
        }
        ds.classify_batch(&xs, c.knn_k, exec)?
    } else {
        let mut forest = Vec::new();
        for p in &c.trees {
            let t = DecisionTree::load(p)?;
            if t.n_features != N_FEATURES || t.width != c.quant_bits {
                return Err(HarnessError::Config(format!(
                    "{}: tree must use {N_FEATURES} features of {} bits",
                    p.display(),
                    c.quant_bits
                )));
            }
            forest.push(tree_compile(&t)?);
        }
        let norm = Normalizer::fit(train.iter().map(|(x, _)| x))
            .ok_or_else(|| HarnessError::Config("training trace produced no flows".into()))?;
        par::map(exec, &xs, |x| crate::control::forest_classify(&forest, &norm.quantize(x, c.quant_bits)))
            .into_iter()
            .collect::<Result<_, _>>()?
    };
    let mut conf = Confusion::default();
    for ((_, truth), p) in test.iter().zip(&predicted) {
        conf.record(*p == Label::Ddos, *truth == Label::Ddos);
    }
    Ok(MetricsReport::from_confusion("classifier", conf, cfg.echo()))
}

/// Runs one experiment. Deterministic in `cfg` apart from `wall_clock_s`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    run_experiment_with(cfg, Execution::default())
}

/// As [`run_experiment`], choosing how the classifier's batch step runs.
pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<MetricsReport, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut m = match cfg.pipeline {
        Pipeline::Entropy => run_entropy(cfg)?,
        Pipeline::Classifier => run_classifier(cfg, exec)?,
    };
    m.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(m)
}

/// Independent experiments, run concurrently under `Parallel`. Each one is
/// itself sequential.
pub fn run_many(cfgs: &[ExperimentConfig], exec: Execution) -> Vec<Result<MetricsReport, HarnessError>> {
    par::map(exec, cfgs, |c| run_experiment_with(c, Execution::Sequential))
}
