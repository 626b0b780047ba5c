//! Per-packet primitive-operation accounting.
//!
//! Pipelines never call the data-plane primitives directly; they go through
//! an [`OpBudget`], which performs the primitive and charges one unit for
//! it. At the end of a pass [`OpBudget::guard`] checks the total against the
//! limit and resets the counter.
//!
//! What counts as one operation:
//!
//! | primitive                         | cost |
//! |-----------------------------------|------|
//! | hash-lane evaluation              | 1    |
//! | register action (read/add/write)  | 1    |
//! | table apply                       | 1    |
//! | ALU op (add, sub, min, max, shift, compare, negate) | 1 |

use std::cmp::Ordering;
use std::fmt;

use super::{hash_lane, DataplaneError, FixedPoint, MatchActionTable, RegisterArray};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub hash: u32,
    pub register: u32,
    pub table: u32,
    pub alu: u32,
}

impl OpCounts {
    pub fn total(&self) -> u32 {
        self.hash + self.register + self.table + self.alu
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ops (hash {}, register {}, table {}, alu {})",
            self.total(),
            self.hash,
            self.register,
            self.table,
            self.alu
        )
    }
}

/// Returned by [`OpBudget::guard`] when a pass used more than the limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BudgetViolation {
    pub used: u32,
    pub limit: u32,
}

impl fmt::Display for BudgetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pass used {} primitive ops, limit is {}", self.used, self.limit)
    }
}

impl std::error::Error for BudgetViolation {}

#[derive(Clone, Debug)]
pub struct OpBudget {
    limit: u32,
    counts: OpCounts,
    peak: u32,
}

impl OpBudget {
    pub fn new(limit: u32) -> Self {
        OpBudget { limit, counts: OpCounts::default(), peak: 0 }
    }

    /// A meter that never rejects; used when a primitive is driven outside a
    /// pipeline (tests, offline tools).
    pub fn unlimited() -> Self {
        Self::new(u32::MAX)
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    pub fn used(&self) -> u32 {
        self.counts.total()
    }

    pub fn counts(&self) -> OpCounts {
        self.counts
    }

    /// Largest total seen by any guarded pass so far.
    pub fn peak(&self) -> u32 {
        self.peak
    }

    /// Adds `n` ALU operations without performing them.
    pub fn charge(&mut self, n: u32) {
        self.counts.alu = self.counts.alu.saturating_add(n);
    }

    /// End-of-pass check; always resets the counter.
    pub fn guard(&mut self) -> Result<OpCounts, BudgetViolation> {
        let counts = std::mem::take(&mut self.counts);
        let used = counts.total();
        self.peak = self.peak.max(used);
        if used <= self.limit {
            Ok(counts)
        } else {
            Err(BudgetViolation { used, limit: self.limit })
        }
    }

    pub fn hash(&mut self, bytes: &[u8], seed: u64, modulus: u64) -> Result<u64, DataplaneError> {
        self.counts.hash += 1;
        hash_lane(bytes, seed, modulus)
    }

    pub fn reg_read(&mut self, reg: &RegisterArray, idx: usize) -> Result<i64, DataplaneError> {
        self.counts.register += 1;
        reg.read(idx)
    }

    pub fn reg_add(
        &mut self,
        reg: &mut RegisterArray,
        idx: usize,
        delta: i64,
    ) -> Result<i64, DataplaneError> {
        self.counts.register += 1;
        reg.add(idx, delta)
    }

    /// Register action that adds `sign` (±1) and returns the updated value
    /// multiplied by `sign`. A stateful ALU evaluates both halves in one action.
    pub fn reg_add_signed(
        &mut self,
        reg: &mut RegisterArray,
        idx: usize,
        sign: i64,
    ) -> Result<i64, DataplaneError> {
        debug_assert!(sign == 1 || sign == -1);
        self.counts.register += 1;
        reg.add(idx, sign).map(|v| v * sign)
    }

    pub fn reg_write(
        &mut self,
        reg: &mut RegisterArray,
        idx: usize,
        v: i64,
    ) -> Result<i64, DataplaneError> {
        self.counts.register += 1;
        reg.write(idx, v)
    }

    pub fn lookup(&mut self, table: &MatchActionTable, key: u64) -> Option<i64> {
        self.counts.table += 1;
        table.lookup(key)
    }

    pub fn iadd(&mut self, a: i64, b: i64) -> Result<i64, DataplaneError> {
        self.counts.alu += 1;
        a.checked_add(b).ok_or(DataplaneError::Overflow { op: "add" })
    }

    pub fn isub(&mut self, a: i64, b: i64) -> Result<i64, DataplaneError> {
        self.counts.alu += 1;
        a.checked_sub(b).ok_or(DataplaneError::Overflow { op: "sub" })
    }

    pub fn imin(&mut self, a: i64, b: i64) -> i64 {
        self.counts.alu += 1;
        a.min(b)
    }

    pub fn imax(&mut self, a: i64, b: i64) -> i64 {
        self.counts.alu += 1;
        a.max(b)
    }

    pub fn ishr(&mut self, a: i64, n: u32) -> i64 {
        self.counts.alu += 1;
        a >> n
    }

    pub fn icmp(&mut self, a: i64, b: i64) -> Ordering {
        self.counts.alu += 1;
        a.cmp(&b)
    }

    pub fn fadd(&mut self, a: FixedPoint, b: FixedPoint) -> Result<FixedPoint, DataplaneError> {
        self.counts.alu += 1;
        a.checked_add(b)
    }

    pub fn fsub(&mut self, a: FixedPoint, b: FixedPoint) -> Result<FixedPoint, DataplaneError> {
        self.counts.alu += 1;
        a.checked_sub(b)
    }

    pub fn fmax(&mut self, a: FixedPoint, b: FixedPoint) -> FixedPoint {
        self.counts.alu += 1;
        a.max(b)
    }

    pub fn fmin(&mut self, a: FixedPoint, b: FixedPoint) -> FixedPoint {
        self.counts.alu += 1;
        a.min(b)
    }

    pub fn fshl(&mut self, a: FixedPoint, n: u32) -> Result<FixedPoint, DataplaneError> {
        self.counts.alu += 1;
        a.shl(n)
    }

    pub fn fshr(&mut self, a: FixedPoint, n: u32) -> FixedPoint {
        self.counts.alu += 1;
        a.shr(n)
    }

    pub fn fcmp(&mut self, a: FixedPoint, b: FixedPoint) -> Ordering {
        self.counts.alu += 1;
        a.cmp(&b)
    }

    /// `|a - b|`: a subtract followed by a conditional negate.
    pub fn fabs_diff(&mut self, a: FixedPoint, b: FixedPoint) -> Result<FixedPoint, DataplaneError> {
        self.counts.alu += 2;
        a.abs_diff(b)
    }

    /// Shift-add multiply; one shift and one add per set bit of the factor.
    pub fn fmul_shift_add(
        &mut self,
        a: FixedPoint,
        factor: FixedPoint,
    ) -> Result<FixedPoint, DataplaneError> {
        let ones = (factor.raw().max(0) as u32).count_ones();
        self.counts.alu += 2 * ones + 1;
        a.shift_add_mul(factor)
    }
}
