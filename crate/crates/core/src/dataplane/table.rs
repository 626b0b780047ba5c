use rustc_hash::FxHashMap;

use super::DataplaneError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatchKind {
    Exact,
    Lpm,
    Range,
}

/// Match field of a [`TableEntry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Match {
    Exact(u64),
    /// `prefix` is stored left-aligned in the key width with zero host bits.
    Lpm { prefix: u64, len: u32 },
    Range { lo: u64, hi: u64 },
}

impl Match {
    pub fn kind(&self) -> MatchKind {
        match self {
            Match::Exact(_) => MatchKind::Exact,
            Match::Lpm { .. } => MatchKind::Lpm,
            Match::Range { .. } => MatchKind::Range,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableEntry {
    pub matcher: Match,
    pub priority: i32,
    pub action: i64,
}

impl TableEntry {
    pub fn exact(key: u64, action: i64) -> Self {
        TableEntry { matcher: Match::Exact(key), priority: 0, action }
    }

    pub fn lpm(prefix: u64, len: u32, action: i64) -> Self {
        TableEntry { matcher: Match::Lpm { prefix, len }, priority: len as i32, action }
    }

    pub fn range(lo: u64, hi: u64, priority: i32, action: i64) -> Self {
        TableEntry { matcher: Match::Range { lo, hi }, priority, action }
    }
}

/// Mask selecting the top `len` bits of a `width`-bit key.
pub fn prefix_mask(width: u32, len: u32) -> u64 {
    debug_assert!(len <= width && width <= 64);
    if len == 0 {
        return 0;
    }
    let full = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    full & (u64::MAX << (width - len))
}

#[derive(Clone, Debug)]
enum Index {
    Exact(FxHashMap<u64, usize>),
    /// One hash map per prefix length, longest first.
    Lpm(Vec<(u32, FxHashMap<u64, usize>)>),
    /// Entry indices by descending priority, insertion order breaking ties.
    Range(Vec<usize>),
}

/// A match-action table of a single kind over keys of `key_width` bits.
///
/// Built once by the control plane and read-only afterwards; lookups take
/// `&self` so a table can be shared across threads.
#[derive(Clone, Debug)]
pub struct MatchActionTable {
    key_width: u32,
    kind: MatchKind,
    entries: Vec<TableEntry>,
    default_action: Option<i64>,
    index: Index,
}

impl MatchActionTable {
    pub fn new(kind: MatchKind, key_width: u32) -> Result<Self, DataplaneError> {
        if key_width == 0 || key_width > 64 {
            return Err(DataplaneError::InvalidArgument(format!(
                "key width must be in 1..=64, got {key_width}"
            )));
        }
        let index = match kind {
            MatchKind::Exact => Index::Exact(FxHashMap::default()),
            MatchKind::Lpm => Index::Lpm(Vec::new()),
            MatchKind::Range => Index::Range(Vec::new()),
        };
        Ok(MatchActionTable { key_width, kind, entries: Vec::new(), default_action: None, index })
    }

    pub fn with_default(mut self, action: i64) -> Self {
        self.default_action = Some(action);
        self
    }

    pub fn set_default(&mut self, action: Option<i64>) {
        self.default_action = action;
    }

    pub fn kind(&self) -> MatchKind {
        self.kind
    }

    pub fn key_width(&self) -> u32 {
        self.key_width
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn default_action(&self) -> Option<i64> {
        self.default_action
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key_max(&self) -> u64 {
        if self.key_width == 64 {
            u64::MAX
        } else {
            (1u64 << self.key_width) - 1
        }
    }

    pub fn insert(&mut self, entry: TableEntry) -> Result<(), DataplaneError> {
        if entry.matcher.kind() != self.kind {
            return Err(DataplaneError::KindMismatch {
                table: self.kind,
                entry: entry.matcher.kind(),
            });
        }
        let max = self.key_max();
        let slot = self.entries.len();
        match (&mut self.index, entry.matcher) {
            (Index::Exact(map), Match::Exact(key)) => {
                if key > max {
                    return Err(DataplaneError::KeyTooWide { key, width: self.key_width });
                }
                if map.contains_key(&key) {
                    return Err(DataplaneError::DuplicateEntry(format!("exact key {key}")));
                }
                map.insert(key, slot);
            }
            (Index::Lpm(levels), Match::Lpm { prefix, len }) => {
                if len > self.key_width {
                    return Err(DataplaneError::BadEntry(format!(
                        "prefix length {len} exceeds key width {}",
                        self.key_width
                    )));
                }
                if prefix > max || prefix & !prefix_mask(self.key_width, len) != 0 {
                    return Err(DataplaneError::BadEntry(format!(
                        "prefix {prefix:#x}/{len} has bits set below the prefix length"
                    )));
                }
                let pos = match levels.binary_search_by(|(l, _)| len.cmp(l)) {
                    Ok(pos) => pos,
                    Err(pos) => {
                        levels.insert(pos, (len, FxHashMap::default()));
                        pos
                    }
                };
                let level = &mut levels[pos].1;
                if level.contains_key(&prefix) {
                    return Err(DataplaneError::DuplicateEntry(format!("prefix {prefix:#x}/{len}")));
                }
                level.insert(prefix, slot);
            }
            (Index::Range(order), Match::Range { lo, hi }) => {
                if lo > hi || hi > max {
                    return Err(DataplaneError::BadEntry(format!(
                        "range [{lo}, {hi}] invalid for width {}",
                        self.key_width
                    )));
                }
                let entries = &self.entries;
                let pos = order.partition_point(|&i| entries[i].priority >= entry.priority);
                order.insert(pos, slot);
            }
            _ => unreachable!("kind checked above"),
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Matching entry, if any (the default action is not consulted).
    pub fn lookup_entry(&self, key: u64) -> Option<&TableEntry> {
        if key > self.key_max() {
            return None;
        }
        let idx = match &self.index {
            Index::Exact(map) => map.get(&key).copied(),
            Index::Lpm(levels) => levels.iter().find_map(|(len, map)| {
                map.get(&(key & prefix_mask(self.key_width, *len))).copied()
            }),
            Index::Range(order) => order.iter().copied().find(|&i| match self.entries[i].matcher {
                Match::Range { lo, hi } => lo <= key && key <= hi,
                _ => false,
            }),
        };
        idx.map(|i| &self.entries[i])
    }

    /// Action for `key`: the matching entry's action, else the default
    /// action, else `None` (a miss). Keys wider than the table never match.
    pub fn lookup(&self, key: u64) -> Option<i64> {
        self.lookup_entry(key).map(|e| e.action).or(self.default_action)
    }
}
