//! In-data-plane DDoS detector: source and destination entropy pipelines
//! per observation window, an EWMA model of legitimate traffic, thresholds
//! derived from that model, and the alarm decision.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::{DataplaneError, FixedPoint, OpBudget};
use crate::entropy::{
    CountSketch, EntropyError, EntropyPipeline, Estimator, ExactCounter, LogTable, SketchDims,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectorError {
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("invalid detector configuration: {0}")]
    Config(String),
}

impl From<DataplaneError> for DetectorError {
    fn from(e: DataplaneError) -> Self {
        DetectorError::Entropy(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlarmPolicy {
    /// Source entropy above its threshold and destination entropy below.
    And,
    /// Either directional condition.
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    /// Packets per window, `W = 2^window_log2`.
    pub window_log2: u32,
    pub warmup_windows: u32,
}

impl WindowConfig {
    pub fn window(&self) -> u64 {
        1 << self.window_log2
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { window_log2: 13, warmup_windows: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    pub window: WindowConfig,
    pub alpha_shift: u32,
    pub k: FixedPoint,
    pub policy: AlarmPolicy,
    pub sketch: SketchDims,
    /// Replace both sketches with exact counters (validation only).
    pub exact_counting: bool,
    pub msb_kept: u32,
    pub log_table_max: u32,
    pub seed: u64,
    pub packet_op_limit: u32,
    pub close_op_limit: u32,
    /// Smallest distance between a mean and its threshold. Window entropies
    /// are only resolved to one LSB (1/16 bit); when benign variation is
    /// finer than that the deviation estimate collapses towards zero and
    /// single-LSB flicker would cross the thresholds.
    pub min_margin: FixedPoint,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window: WindowConfig::default(),
            alpha_shift: 3,
            k: FixedPoint::from_raw(3 << 4),
            policy: AlarmPolicy::And,
            sketch: SketchDims::default(),
            exact_counting: false,
            msb_kept: 8,
            log_table_max: 1 << 20,
            seed: 0,
            packet_op_limit: 32,
            close_op_limit: 96,
            min_margin: FixedPoint::from_raw(1),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let w = &self.window;
        if !(1..=24).contains(&w.window_log2) {
            return Err(DetectorError::Config(format!("window 2^{} out of range", w.window_log2)));
        }
        if w.warmup_windows < 1 {
            return Err(DetectorError::Config("warmup_windows must be at least 1".into()));
        }
        if self.alpha_shift == 0 || self.alpha_shift > 16 {
            return Err(DetectorError::Config(format!("alpha_shift {} out of 1..=16", self.alpha_shift)));
        }
        if self.k < FixedPoint::ZERO {
            return Err(DetectorError::Config("sensitivity k must be non-negative".into()));
        }
        if self.min_margin < FixedPoint::ZERO {
            return Err(DetectorError::Config("min_margin must be non-negative".into()));
        }
        if (self.log_table_max as u64) < w.window() {
            return Err(DetectorError::Config("log table must cover at least one window".into()));
        }
        Ok(())
    }
}

/// EWMA mean and EWMA mean absolute deviation of one direction's window
/// entropy. Both are kept scaled by `2^alpha_shift`, i.e. with
/// `alpha_shift` extra fractional bits beyond 28.4, so the `>> alpha_shift`
/// in the update does not discard the low bits of every step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DirectionStats {
    pub mean_acc: FixedPoint,
    pub dev_acc: FixedPoint,
}

/// Legitimate-traffic model for source and destination entropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub src: DirectionStats,
    pub dst: DirectionStats,
    pub alpha_shift: u32,
    pub k: FixedPoint,
    pub initialized: bool,
}

impl TrafficModel {
    pub fn new(alpha_shift: u32, k: FixedPoint) -> Self {
        TrafficModel {
            src: DirectionStats::default(),
            dst: DirectionStats::default(),
            alpha_shift,
            k,
            initialized: false,
        }
    }

    /// An initialized model with the given 28.4 statistics.
    pub fn with_stats(
        (mean_src, dev_src): (FixedPoint, FixedPoint),
        (mean_dst, dev_dst): (FixedPoint, FixedPoint),
        alpha_shift: u32,
        k: FixedPoint,
    ) -> Result<Self, DataplaneError> {
        let scale = |v: FixedPoint| v.shl(alpha_shift);
        Ok(TrafficModel {
            src: DirectionStats { mean_acc: scale(mean_src)?, dev_acc: scale(dev_src)? },
            dst: DirectionStats { mean_acc: scale(mean_dst)?, dev_acc: scale(dev_dst)? },
            alpha_shift,
            k,
            initialized: true,
        })
    }

    // The 28.4 views below round toward negative infinity.
    pub fn mean_src(&self) -> FixedPoint {
        self.src.mean_acc.shr(self.alpha_shift)
    }
    pub fn dev_src(&self) -> FixedPoint {
        self.src.dev_acc.shr(self.alpha_shift)
    }
    pub fn mean_dst(&self) -> FixedPoint {
        self.dst.mean_acc.shr(self.alpha_shift)
    }
    pub fn dev_dst(&self) -> FixedPoint {
        self.dst.dev_acc.shr(self.alpha_shift)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub src_upper: FixedPoint,
    pub dst_lower: FixedPoint,
}

/// `src_upper = mean_src + k*dev_src`, `dst_lower = mean_dst - k*dev_dst`,
/// with `k*dev` evaluated by shift-and-add on the raw values.
///
/// Evaluated on the scaled statistics, then brought back to 28.4 with the
/// upper threshold rounded down and the lower one rounded up. Entropies
/// are 28.4 values, so the strict comparisons against these rounded
/// thresholds give the same answer as against the unrounded ones.
pub fn compute_thresholds(model: &TrafficModel, ops: &mut OpBudget) -> Result<Thresholds, DataplaneError> {
    compute_thresholds_with_floor(model, FixedPoint::ZERO, ops)
}

/// As [`compute_thresholds`], but each `k * dev` margin is raised to at
/// least `min_margin` first.
pub fn compute_thresholds_with_floor(
    model: &TrafficModel,
    min_margin: FixedPoint,
    ops: &mut OpBudget,
) -> Result<Thresholds, DataplaneError> {
    let a = model.alpha_shift;
    let mut src_margin = ops.fmul_shift_add(model.src.dev_acc, model.k)?;
    let mut dst_margin = ops.fmul_shift_add(model.dst.dev_acc, model.k)?;
    if min_margin != FixedPoint::ZERO {
        let floor = min_margin.shl(a)?;
        src_margin = ops.fmax(src_margin, floor);
        dst_margin = ops.fmax(dst_margin, floor);
    }
    let upper = ops.fadd(model.src.mean_acc, src_margin)?;
    let lower = ops.fsub(model.dst.mean_acc, dst_margin)?;
    let lower = ops.fadd(lower, FixedPoint::from_raw((1 << a) - 1))?;
    Ok(Thresholds { src_upper: ops.fshr(upper, a), dst_lower: ops.fshr(lower, a) })
}

/// Strict comparisons: an entropy sitting exactly on its threshold does not
/// count as crossing it.
pub fn evaluate_window(
    h_src: FixedPoint,
    h_dst: FixedPoint,
    th: &Thresholds,
    policy: AlarmPolicy,
    ops: &mut OpBudget,
) -> bool {
    let src_high = ops.fcmp(h_src, th.src_upper).is_gt();
    let dst_low = ops.fcmp(h_dst, th.dst_lower).is_lt();
    ops.charge(1);
    match policy {
        AlarmPolicy::And => src_high && dst_low,
        AlarmPolicy::Or => src_high || dst_low,
    }
}

/// One EWMA step `x + (target - x) >> alpha`. A step that the shift would
/// round to zero moves one raw unit instead, so a constant input is reached
/// exactly rather than stalling up to `2^alpha - 1` units short.
fn ewma_step(
    x: FixedPoint,
    target: FixedPoint,
    alpha_shift: u32,
    ops: &mut OpBudget,
) -> Result<FixedPoint, DataplaneError> {
    let diff = ops.fsub(target, x)?;
    let mut step = ops.fshr(diff, alpha_shift);
    ops.charge(1);
    if step == FixedPoint::ZERO && diff != FixedPoint::ZERO {
        step = FixedPoint::from_raw(diff.raw().signum());
    }
    ops.fadd(x, step)
}

fn update_direction(
    stats: &mut DirectionStats,
    h: FixedPoint,
    alpha_shift: u32,
    ops: &mut OpBudget,
) -> Result<(), DataplaneError> {
    let h = ops.fshl(h, alpha_shift)?;
    let abs_dev = ops.fabs_diff(h, stats.mean_acc)?;
    stats.mean_acc = ewma_step(stats.mean_acc, h, alpha_shift, ops)?;
    stats.dev_acc = ewma_step(stats.dev_acc, abs_dev, alpha_shift, ops)?;
    Ok(())
}

/// Folds a window into the model. Anomalous windows leave it untouched; the
/// first window seeds the means with zero deviation.
pub fn model_update(
    model: &mut TrafficModel,
    h_src: FixedPoint,
    h_dst: FixedPoint,
    anomalous: bool,
    ops: &mut OpBudget,
) -> Result<(), DataplaneError> {
    if anomalous {
        return Ok(());
    }
    let a = model.alpha_shift;
    if !model.initialized {
        model.src = DirectionStats { mean_acc: ops.fshl(h_src, a)?, dev_acc: FixedPoint::ZERO };
        model.dst = DirectionStats { mean_acc: ops.fshl(h_dst, a)?, dev_acc: FixedPoint::ZERO };
        model.initialized = true;
        return Ok(());
    }
    update_direction(&mut model.src, h_src, a, ops)?;
    update_direction(&mut model.dst, h_dst, a, ops)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub window_id: u64,
    pub h_src: FixedPoint,
    pub h_dst: FixedPoint,
    pub thresholds: Thresholds,
    /// First alarmed window of a run of consecutive alarms.
    pub onset: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowResult {
    pub window_id: u64,
    pub h_src: FixedPoint,
    pub h_dst: FixedPoint,
    pub anomalous: bool,
    /// `None` during warm-up.
    pub thresholds: Option<Thresholds>,
    pub alarm: Option<AlarmEvent>,
}

/// One line of the alarm log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmLogLine {
    pub window_id: u64,
    pub h_src_raw: i32,
    pub h_dst_raw: i32,
    pub src_upper_raw: i32,
    pub dst_lower_raw: i32,
    pub anomalous: bool,
}

impl WindowResult {
    /// Alarm-log record for evaluated (post warm-up) windows.
    pub fn log_line(&self) -> Option<AlarmLogLine> {
        self.thresholds.map(|th| AlarmLogLine {
            window_id: self.window_id,
            h_src_raw: self.h_src.raw(),
            h_dst_raw: self.h_dst.raw(),
            src_upper_raw: th.src_upper.raw(),
            dst_lower_raw: th.dst_lower.raw(),
            anomalous: self.anomalous,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Detector {
    cfg: DetectorConfig,
    src: EntropyPipeline,
    dst: EntropyPipeline,
    model: TrafficModel,
    close_ops: OpBudget,
    window_id: u64,
    prev_alarm: bool,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self, DetectorError> {
        let table = Arc::new(LogTable::build(cfg.log_table_max, cfg.msb_kept)?);
        Self::with_table(cfg, table)
    }

    /// Builds a detector around an existing (possibly imported) log table.
    pub fn with_table(cfg: DetectorConfig, table: Arc<LogTable>) -> Result<Self, DetectorError> {
        cfg.validate()?;
        if table.max_covered() < cfg.window.window() {
            return Err(DetectorError::Config("log table does not cover a full window".into()));
        }
        let estimator = |salt: u64| -> Result<Estimator, DetectorError> {
            Ok(if cfg.exact_counting {
                Estimator::Exact(ExactCounter::new())
            } else {
                Estimator::Sketch(CountSketch::new(cfg.sketch, cfg.seed ^ salt)?)
            })
        };
        let lw = cfg.window.window_log2;
        let src = EntropyPipeline::new(estimator(0x5352_4300)?, table.clone(), lw, cfg.packet_op_limit)?;
        let dst = EntropyPipeline::new(estimator(0x4453_5400)?, table, lw, cfg.packet_op_limit)?;
        Ok(Detector {
            model: TrafficModel::new(cfg.alpha_shift, cfg.k),
            close_ops: OpBudget::new(cfg.close_op_limit),
            cfg,
            src,
            dst,
            window_id: 0,
            prev_alarm: false,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn model(&self) -> &TrafficModel {
        &self.model
    }

    pub fn windows_completed(&self) -> u64 {
        self.window_id
    }

    /// Per-direction entropy pipelines (source, destination).
    pub fn pipelines(&self) -> (&EntropyPipeline, &EntropyPipeline) {
        (&self.src, &self.dst)
    }

    /// Peak op count of any window-close pass so far.
    pub fn peak_close_ops(&self) -> u32 {
        self.close_ops.peak()
    }

    pub fn process_packet(&mut self, src_ip: u32, dst_ip: u32) -> Result<Option<WindowResult>, DetectorError> {
        let src_done = self.src.observe(src_ip)?;
        let dst_done = self.dst.observe(dst_ip)?;
        debug_assert_eq!(src_done, dst_done);
        if !src_done {
            return Ok(None);
        }
        self.close_window().map(Some)
    }

    fn close_window(&mut self) -> Result<WindowResult, DetectorError> {
        let ops = &mut self.close_ops;
        let h_src = self.src.close_window(ops)?;
        let h_dst = self.dst.close_window(ops)?;
        let window_id = self.window_id;
        self.window_id += 1;

        let evaluated = window_id >= self.cfg.window.warmup_windows as u64 && self.model.initialized;
        let (thresholds, anomalous) = if evaluated {
            let th = compute_thresholds_with_floor(&self.model, self.cfg.min_margin, ops)?;
            let anomalous = evaluate_window(h_src, h_dst, &th, self.cfg.policy, ops);
            (Some(th), anomalous)
        } else {
            (None, false)
        };
        model_update(&mut self.model, h_src, h_dst, anomalous, ops)?;
        ops.guard().map_err(DataplaneError::from)?;

        let alarm = match (anomalous, thresholds) {
            (true, Some(th)) => Some(AlarmEvent {
                window_id,
                h_src,
                h_dst,
                thresholds: th,
                onset: !self.prev_alarm,
            }),
            _ => None,
        };
        self.prev_alarm = anomalous;
        Ok(WindowResult { window_id, h_src, h_dst, anomalous, thresholds, alarm })
    }
}
