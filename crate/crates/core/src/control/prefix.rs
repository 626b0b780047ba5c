use super::ControlError;

/// Minimal prefix cover of `[lo, hi]` in a `width`-bit space, as
/// `(prefix value, prefix length)` pairs sorted by value.
pub fn expand_range_to_prefixes(lo: u64, hi: u64, width: u32) -> Result<Vec<(u64, u32)>, ControlError> {
    if width == 0 || width > 63 {
        return Err(ControlError::Argument(format!("width {width} outside 1..=63")));
    }
    if lo > hi {
        return Err(ControlError::Argument(format!("empty range [{lo}, {hi}]")));
    }
    if hi >> width != 0 {
        return Err(ControlError::Argument(format!("{hi} does not fit in {width} bits")));
    }
    let mut out = Vec::new();
    let mut cur = lo;
    loop {
        // largest aligned block starting at cur that stays within hi
        let mut size_log = if cur == 0 { width } else { cur.trailing_zeros().min(width) };
        while size_log > 0 && cur + ((1u64 << size_log) - 1) > hi {
            size_log -= 1;
        }
        out.push((cur, width - size_log));
        let end = cur + ((1u64 << size_log) - 1);
        if end >= hi {
            break;
        }
        cur = end + 1;
    }
    Ok(out)
}
