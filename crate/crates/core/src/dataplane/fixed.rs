use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::DataplaneError;

/// Number of fractional bits carried by [`FixedPoint`].
pub const FRAC_BITS: u32 = 4;

/// Signed 28.4 fixed-point value: `raw / 16`.
///
/// This is the only real-number representation allowed inside the simulated
/// forwarding device. Everything here is add, subtract, compare or shift on
/// the raw integer; overflow is reported instead of wrapping.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedPoint(i32);

impl FixedPoint {
    pub const ZERO: FixedPoint = FixedPoint(0);
    pub const ONE: FixedPoint = FixedPoint(1 << FRAC_BITS);
    pub const MAX: FixedPoint = FixedPoint(i32::MAX);

    pub const fn from_raw(raw: i32) -> Self {
        FixedPoint(raw)
    }

    pub const fn raw(self) -> i32 {
        self.0
    }

    /// Integer `n` as fixed point.
    pub fn from_int(n: i32) -> Result<Self, DataplaneError> {
        n.checked_mul(1 << FRAC_BITS)
            .map(FixedPoint)
            .ok_or(DataplaneError::Overflow { op: "from_int" })
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, DataplaneError> {
        self.0
            .checked_add(rhs.0)
            .map(FixedPoint)
            .ok_or(DataplaneError::Overflow { op: "add" })
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, DataplaneError> {
        self.0
            .checked_sub(rhs.0)
            .map(FixedPoint)
            .ok_or(DataplaneError::Overflow { op: "sub" })
    }

    /// Arithmetic right shift of the raw value (floor division by `2^n`).
    pub fn shr(self, n: u32) -> Self {
        FixedPoint(self.0 >> n.min(31))
    }

    /// Left shift; bits shifted past the sign are an overflow.
    pub fn shl(self, n: u32) -> Result<Self, DataplaneError> {
        if n >= 32 {
            return if self.0 == 0 {
                Ok(self)
            } else {
                Err(DataplaneError::Overflow { op: "shl" })
            };
        }
        let shifted = self.0 << n;
        if shifted >> n == self.0 {
            Ok(FixedPoint(shifted))
        } else {
            Err(DataplaneError::Overflow { op: "shl" })
        }
    }

    pub fn abs_diff(self, rhs: Self) -> Result<Self, DataplaneError> {
        let d = self.checked_sub(rhs)?;
        if d.0 < 0 {
            d.0.checked_neg()
                .map(FixedPoint)
                .ok_or(DataplaneError::Overflow { op: "abs" })
        } else {
            Ok(d)
        }
    }

    /// Multiply by a non-negative fixed-point factor using only shifts and
    /// adds: one shifted copy of `self` per set bit of `factor.raw()`.
    pub fn shift_add_mul(self, factor: FixedPoint) -> Result<Self, DataplaneError> {
        if factor.0 < 0 {
            return Err(DataplaneError::InvalidArgument(
                "shift-add multiplier must be non-negative".into(),
            ));
        }
        // Accumulate in raw units scaled by 2^FRAC_BITS, then shift back down.
        let mut acc: i64 = 0;
        let mut bits = factor.0 as u32;
        let mut pos = 0u32;
        while bits != 0 {
            if bits & 1 == 1 {
                acc += (self.0 as i64) << pos;
            }
            bits >>= 1;
            pos += 1;
        }
        let out = acc >> FRAC_BITS;
        i32::try_from(out)
            .map(FixedPoint)
            .map_err(|_| DataplaneError::Overflow { op: "shift_add_mul" })
    }

    pub fn clamp(self, lo: Self, hi: Self) -> Self {
        FixedPoint(self.0.clamp(lo.0, hi.0))
    }
}

/// Binary operation selector for [`fxp_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FxpOp {
    Add,
    Sub,
    Cmp,
    /// Shift right by the raw value of the right operand.
    Shr,
    /// Shift left by the raw value of the right operand.
    Shl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FxpResult {
    Value(FixedPoint),
    Ordering(Ordering),
}

/// Single entry point over the four primitive ALU operations.
pub fn fxp_arith(a: FixedPoint, b: FixedPoint, op: FxpOp) -> Result<FxpResult, DataplaneError> {
    let shift_amount = || {
        u32::try_from(b.0).map_err(|_| DataplaneError::InvalidArgument("negative shift".into()))
    };
    Ok(match op {
        FxpOp::Add => FxpResult::Value(a.checked_add(b)?),
        FxpOp::Sub => FxpResult::Value(a.checked_sub(b)?),
        FxpOp::Cmp => FxpResult::Ordering(a.cmp(&b)),
        FxpOp::Shr => FxpResult::Value(a.shr(shift_amount()?)),
        FxpOp::Shl => FxpResult::Value(a.shl(shift_amount()?)?),
    })
}

impl fmt::Debug for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedPoint({})", self)
    }
}

impl fmt::Display for FixedPoint {
    // Exact decimal rendering: 4 fractional bits need at most 4 decimal digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let raw = self.0 as i64;
        let sign = if raw < 0 { "-" } else { "" };
        let mag = raw.unsigned_abs();
        let int = mag >> FRAC_BITS;
        let frac = (mag & ((1 << FRAC_BITS) - 1)) * 625;
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else {
            let digits = format!("{frac:04}");
            write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
        }
    }
}
