use std::sync::Arc;

use crate::dataplane::{FixedPoint, OpBudget, OpCounts, FRAC_BITS};

use super::{EntropyError, Estimator, FrequencyEstimator, LogTable};

/// Running entropy norm `S = sum f*log2(f)` for the current window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EntropyAccumulator {
    pub norm: FixedPoint,
    pub count: u32,
}

impl EntropyAccumulator {
    fn g(lt: &LogTable, c: i64, ops: &mut OpBudget) -> Result<FixedPoint, EntropyError> {
        let key = c.max(0) as u64;
        ops.lookup(lt.table(), key)
            .map(|raw| FixedPoint::from_raw(raw as i32))
            .ok_or(EntropyError::LogTableMiss(key))
    }

    /// `S <- max(0, S + g(c_new) - g(c_prev))`, `count <- count + 1`.
    pub fn update(
        &mut self,
        c_prev: i64,
        c_new: i64,
        lt: &LogTable,
        ops: &mut OpBudget,
    ) -> Result<(), EntropyError> {
        let g_new = Self::g(lt, c_new, ops)?;
        let g_prev = Self::g(lt, c_prev, ops)?;
        let delta = ops.fsub(g_new, g_prev)?;
        let s = ops.fadd(self.norm, delta)?;
        self.norm = ops.fmax(s, FixedPoint::ZERO);
        ops.charge(1); // window packet counter
        self.count += 1;
        Ok(())
    }

    /// `H = log2(W) - S / W`, clamped to `[0, log2 W]`. `W` must be
    /// `2^window_log2` and the window must be complete.
    pub fn finalize(&self, window_log2: u32, ops: &mut OpBudget) -> Result<FixedPoint, EntropyError> {
        let window = 1u64 << window_log2;
        if self.count as u64 != window {
            return Err(EntropyError::WindowIncomplete { count: self.count as u64, window });
        }
        let log_w = FixedPoint::from_raw((window_log2 << FRAC_BITS) as i32);
        let mean_norm = ops.fshr(self.norm, window_log2);
        let h = ops.fsub(log_w, mean_norm)?;
        let h = ops.fmax(h, FixedPoint::ZERO);
        Ok(ops.fmin(h, log_w))
    }
}

/// Per-packet entropy estimation over one address field.
#[derive(Clone, Debug)]
pub struct EntropyPipeline {
    estimator: Estimator,
    table: Arc<LogTable>,
    acc: EntropyAccumulator,
    window_log2: u32,
    ops: OpBudget,
}

impl EntropyPipeline {
    pub fn new(
        estimator: Estimator,
        table: Arc<LogTable>,
        window_log2: u32,
        op_limit: u32,
    ) -> Result<Self, EntropyError> {
        if window_log2 == 0 || window_log2 > 24 {
            return Err(EntropyError::InvalidArgument(format!(
                "window must be 2^1..2^24 packets, got 2^{window_log2}"
            )));
        }
        Ok(EntropyPipeline {
            estimator,
            table,
            acc: EntropyAccumulator::default(),
            window_log2,
            ops: OpBudget::new(op_limit),
        })
    }

    /// Runs the per-packet pass for `key`. Returns `true` when this packet
    /// completed the window; call [`EntropyPipeline::close_window`] next.
    pub fn observe(&mut self, key: u32) -> Result<bool, EntropyError> {
        let (c_prev, c_new) = self.estimator.update(key, &mut self.ops)?;
        self.acc.update(c_prev, c_new, &self.table, &mut self.ops)?;
        let done = self.ops.icmp(self.acc.count as i64, 1 << self.window_log2).is_eq();
        self.ops.guard()?;
        Ok(done)
    }

    /// Finalizes the window entropy and clears the window state.
    pub fn close_window(&mut self, ops: &mut OpBudget) -> Result<FixedPoint, EntropyError> {
        let h = self.acc.finalize(self.window_log2, ops)?;
        self.acc = EntropyAccumulator::default();
        self.estimator.reset();
        Ok(h)
    }

    pub fn accumulator(&self) -> EntropyAccumulator {
        self.acc
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    /// Largest per-packet op count seen so far.
    pub fn peak_ops(&self) -> u32 {
        self.ops.peak()
    }

    /// Op breakdown of one per-packet pass for `key`, measured on a copy so
    /// the pipeline state is untouched.
    pub fn probe_ops(&self, key: u32) -> Result<OpCounts, EntropyError> {
        let mut probe = self.clone();
        probe.ops = OpBudget::unlimited();
        let (c_prev, c_new) = probe.estimator.update(key, &mut probe.ops)?;
        probe.acc.update(c_prev, c_new, &probe.table, &mut probe.ops)?;
        probe.ops.icmp(probe.acc.count as i64, 1 << probe.window_log2);
        Ok(probe.ops.counts())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{CountSketch, ExactCounter, SketchDims};

    fn lt() -> Arc<LogTable> {
        Arc::new(LogTable::build(1 << 20, 8).unwrap())
    }

    fn fx(raw: i32) -> FixedPoint {
        FixedPoint::from_raw(raw)
    }

    #[test]
    fn update_examples() {
        let t = lt();
        let mut ops = OpBudget::unlimited();
        let mut acc = EntropyAccumulator::default();
        acc.update(0, 1, &t, &mut ops).unwrap();
        assert_eq!(acc.norm, FixedPoint::ZERO);
        acc.update(1, 2, &t, &mut ops).unwrap();
        assert_eq!(acc.norm, FixedPoint::from_int(2).unwrap());
        assert_eq!(acc.count, 2);
    }

    #[test]
    fn identical_keys_telescope_to_g_of_w() {
        let t = lt();
        let mut ops = OpBudget::unlimited();
        let mut acc = EntropyAccumulator::default();
        for c in 0..16 {
            acc.update(c, c + 1, &t, &mut ops).unwrap();
        }
        assert_eq!(acc.norm, FixedPoint::from_int(64).unwrap());
        assert_eq!(acc.finalize(4, &mut ops).unwrap(), FixedPoint::ZERO);
    }

    fn window_entropy(keys: &[u32], log2w: u32) -> FixedPoint {
        let mut p = EntropyPipeline::new(Estimator::Exact(ExactCounter::new()), lt(), log2w, 64).unwrap();
        let mut done = false;
        for &k in keys {
            done = p.observe(k).unwrap();
        }
        assert!(done);
        p.close_window(&mut OpBudget::unlimited()).unwrap()
    }

    #[test]
    fn finalize_examples() {
        assert_eq!(window_entropy(&[9; 16], 4), fx(0));
        let distinct: Vec<u32> = (0..16).collect();
        assert_eq!(window_entropy(&distinct, 4), FixedPoint::from_int(4).unwrap());
        let halves: Vec<u32> = [1u32; 8].into_iter().chain([2u32; 8]).collect();
        assert_eq!(window_entropy(&halves, 4), FixedPoint::ONE);
    }

    #[test]
    fn finalize_requires_full_window() {
        let acc = EntropyAccumulator { norm: fx(0), count: 15 };
        assert!(matches!(
            acc.finalize(4, &mut OpBudget::unlimited()),
            Err(EntropyError::WindowIncomplete { count: 15, window: 16 })
        ));
    }

    #[test]
    fn default_sketch_pass_fits_budget() {
        let sk = CountSketch::new(SketchDims::default(), 1).unwrap();
        let mut p = EntropyPipeline::new(Estimator::Sketch(sk), lt(), 13, 32).unwrap();
        let probe = p.probe_ops(0x0a000001).unwrap();
        assert_eq!(probe.total(), 30, "{probe}");
        for k in 0..5000u32 {
            p.observe(k % 300).unwrap();
        }
        assert!(p.peak_ops() <= 32);
    }

    #[test]
    fn over_budget_pass_is_rejected() {
        let sk = CountSketch::new(SketchDims::default(), 1).unwrap();
        let mut p = EntropyPipeline::new(Estimator::Sketch(sk), lt(), 13, 29).unwrap();
        assert!(matches!(p.observe(1), Err(EntropyError::Dataplane(_))));
    }

    #[test]
    fn reset_between_windows() {
        let sk = CountSketch::new(SketchDims::default(), 1).unwrap();
        let mut p = EntropyPipeline::new(Estimator::Sketch(sk), lt(), 2, 32).unwrap();
        for k in [5, 5, 5, 5] {
            p.observe(k).unwrap();
        }
        p.close_window(&mut OpBudget::unlimited()).unwrap();
        assert_eq!(p.estimator().estimate(5), 0);
        assert_eq!(p.accumulator(), EntropyAccumulator::default());
    }
}
