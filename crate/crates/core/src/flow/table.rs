use crate::dataplane::hash_lane;

use super::{FlowError, FlowKey, FlowRecord, ReportPacket};

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// Ethernet + IPv4 + L4 header bytes added to the payload for byte counts.
pub fn header_len(proto: u8) -> u64 {
    match proto {
        PROTO_TCP => 54,
        PROTO_UDP => 42,
        _ => 34,
    }
}

/// Per-flow accumulators kept in data-plane registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowDescriptor {
    pub key: FlowKey,
    pub pkt_count: u32,
    pub byte_count: u64,
    pub payload_bytes: u64,
    pub sum_iat_us: u64,
    /// Saturates instead of overflowing.
    pub sum_iat_sq_us: u64,
    /// `None` until the flow has two packets.
    pub min_iat_us: Option<u32>,
    pub max_iat_us: Option<u32>,
    pub min_payload: u16,
    pub max_payload: u16,
    pub first_ts_us: u64,
    pub last_ts_us: u64,
    pub dirty: bool,
}

impl FlowDescriptor {
    fn start(key: FlowKey, payload_len: u16, ts_us: u64) -> Self {
        FlowDescriptor {
            key,
            pkt_count: 1,
            byte_count: payload_len as u64 + header_len(key.proto),
            payload_bytes: payload_len as u64,
            sum_iat_us: 0,
            sum_iat_sq_us: 0,
            min_iat_us: None,
            max_iat_us: None,
            min_payload: payload_len,
            max_payload: payload_len,
            first_ts_us: ts_us,
            last_ts_us: ts_us,
            dirty: true,
        }
    }

    fn accumulate(&mut self, payload_len: u16, ts_us: u64) {
        let iat = ts_us - self.last_ts_us;
        let iat32 = u32::try_from(iat).unwrap_or(u32::MAX);
        self.pkt_count = self.pkt_count.saturating_add(1);
        self.byte_count += payload_len as u64 + header_len(self.key.proto);
        self.payload_bytes += payload_len as u64;
        self.sum_iat_us += iat;
        self.sum_iat_sq_us = self.sum_iat_sq_us.saturating_add(iat.saturating_mul(iat));
        self.min_iat_us = Some(self.min_iat_us.map_or(iat32, |m| m.min(iat32)));
        self.max_iat_us = Some(self.max_iat_us.map_or(iat32, |m| m.max(iat32)));
        self.min_payload = self.min_payload.min(payload_len);
        self.max_payload = self.max_payload.max(payload_len);
        self.last_ts_us = ts_us;
        self.dirty = true;
    }
}

/// Hash-addressed flow register file with evict-and-report collisions.
#[derive(Clone, Debug)]
pub struct FlowTable {
    slots: Vec<Option<FlowDescriptor>>,
    seed: u64,
    last_ts_us: Option<u64>,
    pending_evictions: Vec<FlowDescriptor>,
}

impl FlowTable {
    pub const DEFAULT_SLOT_BITS: u32 = 16;

    pub fn new(seed: u64) -> Self {
        Self::with_slot_bits(Self::DEFAULT_SLOT_BITS, seed)
    }

    pub fn with_slot_bits(slot_bits: u32, seed: u64) -> Self {
        FlowTable {
            slots: vec![None; 1 << slot_bits],
            seed,
            last_ts_us: None,
            pending_evictions: Vec::new(),
        }
    }

    pub fn slot_of(&self, key: &FlowKey) -> usize {
        hash_lane(&key.to_bytes(), self.seed, self.slots.len() as u64).expect("non-empty table") as usize
    }

    pub fn get(&self, key: &FlowKey) -> Option<&FlowDescriptor> {
        self.slots[self.slot_of(key)].as_ref().filter(|d| d.key == *key)
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn pending_evictions(&self) -> &[FlowDescriptor] {
        &self.pending_evictions
    }

    /// Records one packet. When the slot holds a different flow, that flow
    /// is evicted: it is queued for the next report and also returned.
    pub fn collect_packet(
        &mut self,
        key: FlowKey,
        payload_len: u16,
        ts_us: u64,
    ) -> Result<Option<FlowDescriptor>, FlowError> {
        if let Some(last) = self.last_ts_us {
            if ts_us < last {
                return Err(FlowError::TraceOrder { previous: last, current: ts_us });
            }
        }
        self.last_ts_us = Some(ts_us);
        let slot = self.slot_of(&key);
        match &mut self.slots[slot] {
            Some(d) if d.key == key => {
                d.accumulate(payload_len, ts_us);
                Ok(None)
            }
            entry => {
                let evicted = entry.replace(FlowDescriptor::start(key, payload_len, ts_us));
                if let Some(ev) = evicted {
                    self.pending_evictions.push(ev);
                }
                Ok(evicted)
            }
        }
    }

    /// Drains pending evictions and dirty flows into report packets for
    /// `window_id`, clearing dirty flags. Evictions come first, in eviction
    /// order, then live flows in slot order. No changes, no packets; more
    /// changes than fit in one packet are split across several.
    pub fn rotate_window(&mut self, window_id: u32) -> Vec<ReportPacket> {
        let mut flows: Vec<FlowRecord> = self
            .pending_evictions
            .drain(..)
            .map(|d| FlowRecord::from_descriptor(&d, true))
            .collect();
        for d in self.slots.iter_mut().flatten().filter(|d| d.dirty) {
            flows.push(FlowRecord::from_descriptor(d, false));
            d.dirty = false;
        }
        flows
            .chunks(ReportPacket::MAX_FLOWS)
            .map(|c| ReportPacket { window_id, flows: c.to_vec() })
            .collect()
    }
}

/// Drives a [`FlowTable`] over trace time, rotating at fixed-length time
/// windows.
#[derive(Clone, Debug)]
pub struct FlowCollector {
    table: FlowTable,
    window_us: u64,
    current: Option<u64>,
}

impl FlowCollector {
    pub fn new(table: FlowTable, window_us: u64) -> Result<Self, FlowError> {
        if window_us == 0 {
            return Err(FlowError::Argument("window length must be positive".into()));
        }
        Ok(FlowCollector { table, window_us, current: None })
    }

    pub fn table(&self) -> &FlowTable {
        &self.table
    }

    fn window_id(idx: u64) -> Result<u32, FlowError> {
        u32::try_from(idx).map_err(|_| FlowError::Argument(format!("window index {idx} exceeds 32 bits")))
    }

    /// Feeds one packet; returns the reports of any window it closed.
    pub fn push(&mut self, key: FlowKey, payload_len: u16, ts_us: u64) -> Result<Vec<ReportPacket>, FlowError> {
        let idx = ts_us / self.window_us;
        let mut out = Vec::new();
        match self.current {
            Some(cur) if idx > cur => {
                out = self.table.rotate_window(Self::window_id(cur)?);
                self.current = Some(idx);
            }
            None => self.current = Some(idx),
            _ => {}
        }
        self.table.collect_packet(key, payload_len, ts_us)?;
        Ok(out)
    }

    /// Closes the last window.
    pub fn finish(&mut self) -> Result<Vec<ReportPacket>, FlowError> {
        match self.current {
            Some(cur) => Ok(self.table.rotate_window(Self::window_id(cur)?)),
            None => Ok(Vec::new()),
        }
    }
}
