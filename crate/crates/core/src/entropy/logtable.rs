use std::io::{BufRead, Write};

use crate::dataplane::{FixedPoint, MatchActionTable, MatchKind, TableEntry, FRAC_BITS};

use super::EntropyError;

const KEY_WIDTH: u32 = 32;

/// `x * log2(x)` in 28.4 fixed point, served by an LPM table.
///
/// Counts below `2^msb_kept` get one exact (/32) entry each. Larger counts
/// are bucketed by their `msb_kept` most significant bits: one prefix entry
/// per bucket, valued at the bucket midpoint. Key `0` maps to `0`, so
/// `g(0) = g(1) = 0`.
///
/// With `B` the bit length of `max_x`, the table holds at most
/// `2^msb_kept + max(0, B - msb_kept) * 2^(msb_kept - 1)` entries
/// (1920 for `msb_kept = 8`, `max_x = 2^20`).
#[derive(Clone, Debug)]
pub struct LogTable {
    table: MatchActionTable,
    msb_kept: u32,
    covered_bits: u32,
}

/// `x * log2 x`, the function the table approximates.
fn xlog2x(x: f64) -> f64 {
    if x <= 1.0 {
        0.0
    } else {
        x * x.log2()
    }
}

fn to_raw(v: f64) -> Result<i64, EntropyError> {
    let raw = (v * (1u32 << FRAC_BITS) as f64).round();
    if raw > i32::MAX as f64 {
        return Err(EntropyError::InvalidArgument(format!(
            "x*log2(x) = {v} is not representable in 28.4 fixed point"
        )));
    }
    Ok(raw as i64)
}

impl LogTable {
    /// Upper bound on the number of entries produced by [`LogTable::build`].
    pub fn entry_bound(max_x: u32, msb_kept: u32) -> usize {
        let bits = 32 - max_x.leading_zeros();
        (1usize << msb_kept) + (bits.saturating_sub(msb_kept) as usize) * (1usize << (msb_kept - 1))
    }

    pub fn build(max_x: u32, msb_kept: u32) -> Result<Self, EntropyError> {
        if !(1..=16).contains(&msb_kept) {
            return Err(EntropyError::InvalidArgument(format!(
                "msb_kept must be in 1..=16, got {msb_kept}"
            )));
        }
        if max_x < 1 || max_x > i32::MAX as u32 {
            return Err(EntropyError::InvalidArgument(format!("max_x {max_x} out of range")));
        }
        let covered_bits = 32 - max_x.leading_zeros();
        let mut table = MatchActionTable::new(MatchKind::Lpm, KEY_WIDTH)?;
        table.insert(TableEntry::lpm(0, KEY_WIDTH, 0))?;
        for bits in 1..=covered_bits {
            let lo = 1u64 << (bits - 1);
            if bits <= msb_kept {
                for x in lo..(lo << 1) {
                    table.insert(TableEntry::lpm(x, KEY_WIDTH, to_raw(xlog2x(x as f64))?))?;
                }
            } else {
                let shift = bits - msb_kept;
                for top in (1u64 << (msb_kept - 1))..(1u64 << msb_kept) {
                    let first = top << shift;
                    let last = first + (1u64 << shift) - 1;
                    let mid = (first as f64 + last as f64) / 2.0;
                    table.insert(TableEntry::lpm(first, KEY_WIDTH - shift, to_raw(xlog2x(mid))?))?;
                }
            }
        }
        Ok(LogTable { table, msb_kept, covered_bits })
    }

    /// `g(x)`, or `None` when `x` is beyond the table's coverage.
    pub fn lookup(&self, x: u64) -> Option<FixedPoint> {
        self.table.lookup(x).map(|raw| FixedPoint::from_raw(raw as i32))
    }

    pub fn table(&self) -> &MatchActionTable {
        &self.table
    }

    pub fn msb_kept(&self) -> u32 {
        self.msb_kept
    }

    /// Largest count the table answers for.
    pub fn max_covered(&self) -> u64 {
        (1u64 << self.covered_bits) - 1
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Text export, one `prefix/len value_raw` line per entry.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# msb_kept={} covered_bits={}", self.msb_kept, self.covered_bits)?;
        for e in self.table.entries() {
            if let crate::dataplane::Match::Lpm { prefix, len } = e.matcher {
                writeln!(out, "{prefix}/{len} {}", e.action)?;
            }
        }
        Ok(())
    }

    /// Loads a table written by [`LogTable::export`] or computed elsewhere.
    /// Lines starting with `#` and blank lines are ignored.
    pub fn import<R: BufRead>(input: R) -> Result<Self, EntropyError> {
        let mut table = MatchActionTable::new(MatchKind::Lpm, KEY_WIDTH)?;
        let mut msb_kept = 0;
        let mut covered_bits = 0;
        for (n, line) in input.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| EntropyError::Parse { line: line_no, msg: e.to_string() })?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("msb_kept", v)) => msb_kept = v.parse().unwrap_or(0),
                        Some(("covered_bits", v)) => covered_bits = v.parse().unwrap_or(0),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| EntropyError::Parse { line: line_no, msg: msg.to_string() };
            let (pfx, value) = line.split_once(char::is_whitespace).ok_or_else(|| bad("expected `prefix/len value`"))?;
            let (prefix, len) = pfx.split_once('/').ok_or_else(|| bad("missing `/len`"))?;
            let prefix: u64 = prefix.parse().map_err(|_| bad("bad prefix"))?;
            let len: u32 = len.parse().map_err(|_| bad("bad prefix length"))?;
            let value: i32 = value.trim().parse().map_err(|_| bad("bad raw value"))?;
            table
                .insert(TableEntry::lpm(prefix, len, value as i64))
                .map_err(|e| bad(&e.to_string()))?;
            if len > 0 && prefix > 0 {
                covered_bits = covered_bits.max(64 - prefix.leading_zeros());
            }
        }
        Ok(LogTable { table, msb_kept, covered_bits })
    }
}
