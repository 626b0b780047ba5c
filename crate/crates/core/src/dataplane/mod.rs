//! Primitive capabilities of the simulated forwarding device: integer
//! registers, match-action tables, seeded hash lanes and 28.4 fixed-point
//! arithmetic, plus the per-packet operation budget.

mod budget;
mod fixed;
mod hash;
mod register;
mod table;

pub use budget::{BudgetViolation, OpBudget, OpCounts};
pub use fixed::{fxp_arith, FixedPoint, FxpOp, FxpResult, FRAC_BITS};
pub use hash::hash_lane;
pub use register::{RegisterArray, RegisterOp};
pub use table::{prefix_mask, Match, MatchActionTable, MatchKind, TableEntry};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataplaneError {
    #[error("arithmetic overflow in {op}")]
    Overflow { op: &'static str },
    #[error("index {index} out of bounds for register array of length {len}")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("key {key:#x} does not fit in {width} bits")]
    KeyTooWide { key: u64, width: u32 },
    #[error("entry kind {entry:?} does not match table kind {table:?}")]
    KindMismatch { table: MatchKind, entry: MatchKind },
    #[error("duplicate table entry: {0}")]
    DuplicateEntry(String),
    #[error("malformed table entry: {0}")]
    BadEntry(String),
    #[error(transparent)]
    Budget(#[from] BudgetViolation),
}
