use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::dataplane::{DataplaneError, OpBudget, RegisterArray};

/// Per-packet frequency estimation over 32-bit keys (IPv4 addresses).
///
/// `update` returns `(c_prev, c_new)`, the estimated count of the key just
/// before and just after recording this packet, both clamped at zero.
pub trait FrequencyEstimator {
    fn update(&mut self, key: u32, ops: &mut OpBudget) -> Result<(i64, i64), DataplaneError>;
    fn estimate(&self, key: u32) -> i64;
    fn reset(&mut self);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchDims {
    pub rows: usize,
    /// Must be a power of two.
    pub cols: usize,
}

impl Default for SketchDims {
    fn default() -> Self {
        SketchDims { rows: 4, cols: 2048 }
    }
}

/// Signed count sketch: `rows` independent hash rows of `cols` 32-bit
/// counters. Each row has its own index seed and sign seed; the estimate is
/// the median over rows of the sign-corrected counters.
#[derive(Clone, Debug)]
pub struct CountSketch {
    dims: SketchDims,
    rows: Vec<RegisterArray>,
    index_seeds: Vec<u64>,
    sign_seeds: Vec<u64>,
}

impl CountSketch {
    pub fn new(dims: SketchDims, seed: u64) -> Result<Self, DataplaneError> {
        if dims.rows == 0 {
            return Err(DataplaneError::InvalidArgument("sketch needs at least one row".into()));
        }
        if !dims.cols.is_power_of_two() {
            return Err(DataplaneError::InvalidArgument(format!(
                "sketch width must be a power of two, got {}",
                dims.cols
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index_seeds = (0..dims.rows).map(|_| rng.random()).collect();
        let sign_seeds = (0..dims.rows).map(|_| rng.random()).collect();
        let rows = (0..dims.rows)
            .map(|_| RegisterArray::new(32, dims.cols))
            .collect::<Result<_, _>>()?;
        Ok(CountSketch { dims, rows, index_seeds, sign_seeds })
    }

    pub fn dims(&self) -> SketchDims {
        self.dims
    }

    fn sign(ops: &mut OpBudget, bytes: &[u8], seed: u64) -> Result<i64, DataplaneError> {
        Ok(if ops.hash(bytes, seed, 2)? == 0 { -1 } else { 1 })
    }

    /// Sign-corrected value of every row for `key`, without updating.
    pub fn row_estimates(&self, key: u32) -> Vec<i64> {
        let bytes = key.to_be_bytes();
        let mut ops = OpBudget::unlimited();
        (0..self.dims.rows)
            .map(|j| {
                let idx = ops.hash(&bytes, self.index_seeds[j], self.dims.cols as u64).unwrap();
                let sign = Self::sign(&mut ops, &bytes, self.sign_seeds[j]).unwrap();
                sign * self.rows[j].read(idx as usize).unwrap()
            })
            .collect()
    }
}

impl FrequencyEstimator for CountSketch {
    fn update(&mut self, key: u32, ops: &mut OpBudget) -> Result<(i64, i64), DataplaneError> {
        let bytes = key.to_be_bytes();
        let mut vals = Vec::with_capacity(self.dims.rows);
        for j in 0..self.dims.rows {
            let idx = ops.hash(&bytes, self.index_seeds[j], self.dims.cols as u64)?;
            let sign = Self::sign(ops, &bytes, self.sign_seeds[j])?;
            vals.push(ops.reg_add_signed(&mut self.rows[j], idx as usize, sign)?);
        }
        // Every row's sign-corrected value grew by exactly one, so the median
        // before the update is the new median minus one.
        let m_new = median(&mut vals, ops);
        let m_prev = ops.isub(m_new, 1)?;
        Ok((ops.imax(m_prev, 0), ops.imax(m_new, 0)))
    }

    fn estimate(&self, key: u32) -> i64 {
        let mut vals = self.row_estimates(key);
        median(&mut vals, &mut OpBudget::unlimited()).max(0)
    }

    fn reset(&mut self) {
        self.rows.iter_mut().for_each(RegisterArray::reset);
    }
}

/// Median of `vals` using min/max networks (each min or max is one ALU op).
/// For an even count the two middle values are averaged with an add and an
/// arithmetic shift, which floors.
pub fn median(vals: &mut [i64], ops: &mut OpBudget) -> i64 {
    match vals.len() {
        0 => 0,
        1 => vals[0],
        2 => {
            let s = vals[0] + vals[1];
            ops.charge(1);
            ops.ishr(s, 1)
        }
        3 => {
            let lo = ops.imin(vals[0], vals[1]);
            let hi = ops.imax(vals[0], vals[1]);
            let m = ops.imin(hi, vals[2]);
            ops.imax(lo, m)
        }
        4 => {
            let lo1 = ops.imin(vals[0], vals[1]);
            let hi1 = ops.imax(vals[0], vals[1]);
            let lo2 = ops.imin(vals[2], vals[3]);
            let hi2 = ops.imax(vals[2], vals[3]);
            let m1 = ops.imax(lo1, lo2);
            let m2 = ops.imin(hi1, hi2);
            ops.charge(1);
            ops.ishr(m1 + m2, 1)
        }
        n => {
            // Odd-even transposition sort: n rounds of compare-exchange.
            for round in 0..n {
                let mut i = round % 2;
                while i + 1 < n {
                    let lo = ops.imin(vals[i], vals[i + 1]);
                    let hi = ops.imax(vals[i], vals[i + 1]);
                    vals[i] = lo;
                    vals[i + 1] = hi;
                    i += 2;
                }
            }
            if n % 2 == 1 {
                vals[n / 2]
            } else {
                ops.charge(1);
                ops.ishr(vals[n / 2 - 1] + vals[n / 2], 1)
            }
        }
    }
}

/// Exact per-key counting. Not deployable on a device (unbounded state);
/// it stands in for the sketch when validating the entropy arithmetic.
#[derive(Clone, Debug, Default)]
pub struct ExactCounter {
    counts: FxHashMap<u32, i64>,
}

impl ExactCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

impl FrequencyEstimator for ExactCounter {
    fn update(&mut self, key: u32, ops: &mut OpBudget) -> Result<(i64, i64), DataplaneError> {
        ops.charge(1);
        let c = self.counts.entry(key).or_insert(0);
        *c += 1;
        Ok((*c - 1, *c))
    }

    fn estimate(&self, key: u32) -> i64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    fn reset(&mut self) {
        self.counts.clear();
    }
}

/// Either estimator behind one concrete type, so pipelines can switch at
/// configuration time.
#[derive(Clone, Debug)]
pub enum Estimator {
    Sketch(CountSketch),
    Exact(ExactCounter),
}

impl FrequencyEstimator for Estimator {
    fn update(&mut self, key: u32, ops: &mut OpBudget) -> Result<(i64, i64), DataplaneError> {
        match self {
            Estimator::Sketch(s) => s.update(key, ops),
            Estimator::Exact(e) => e.update(key, ops),
        }
    }

    fn estimate(&self, key: u32) -> i64 {
        match self {
            Estimator::Sketch(s) => s.estimate(key),
            Estimator::Exact(e) => e.estimate(key),
        }
    }

    fn reset(&mut self) {
        match self {
            Estimator::Sketch(s) => s.reset(),
            Estimator::Exact(e) => e.reset(),
        }
    }
}
