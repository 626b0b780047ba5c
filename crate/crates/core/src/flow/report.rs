use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{FlowDescriptor, FlowError, FlowKey};

/// One flow as carried in a report packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub pkt_count: u32,
    pub byte_count: u64,
    pub payload_bytes: u64,
    pub sum_iat_us: u64,
    pub sum_iat_sq_us: u64,
    pub min_iat_us: Option<u32>,
    pub max_iat_us: Option<u32>,
    pub min_payload: u16,
    pub max_payload: u16,
    pub flags: u16,
}

impl FlowRecord {
    pub const WIRE_LEN: usize = 63;
    pub const FLAG_EVICTED: u16 = 1;

    pub fn from_descriptor(d: &FlowDescriptor, evicted: bool) -> Self {
        FlowRecord {
            key: d.key,
            pkt_count: d.pkt_count,
            byte_count: d.byte_count,
            payload_bytes: d.payload_bytes,
            sum_iat_us: d.sum_iat_us,
            sum_iat_sq_us: d.sum_iat_sq_us,
            min_iat_us: d.min_iat_us,
            max_iat_us: d.max_iat_us,
            min_payload: d.min_payload,
            max_payload: d.max_payload,
            flags: if evicted { Self::FLAG_EVICTED } else { 0 },
        }
    }

    pub fn evicted(&self) -> bool {
        self.flags & Self::FLAG_EVICTED != 0
    }

    /// Span between first and last packet; inter-arrival times telescope.
    pub fn duration_us(&self) -> u64 {
        self.sum_iat_us
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.key.to_bytes());
        out.extend_from_slice(&self.pkt_count.to_be_bytes());
        out.extend_from_slice(&self.byte_count.to_be_bytes());
        out.extend_from_slice(&self.payload_bytes.to_be_bytes());
        out.extend_from_slice(&self.sum_iat_us.to_be_bytes());
        out.extend_from_slice(&self.sum_iat_sq_us.to_be_bytes());
        out.extend_from_slice(&self.min_iat_us.unwrap_or(0).to_be_bytes());
        out.extend_from_slice(&self.max_iat_us.unwrap_or(0).to_be_bytes());
        out.extend_from_slice(&self.min_payload.to_be_bytes());
        out.extend_from_slice(&self.max_payload.to_be_bytes());
        out.extend_from_slice(&self.flags.to_be_bytes());
    }

    fn read_from(b: &[u8]) -> Result<Self, FlowError> {
        let mut c = Cursor(b);
        let key = FlowKey::from_bytes(c.take::<13>().expect("record length checked"));
        let pkt_count = c.u32();
        let byte_count = c.u64();
        let payload_bytes = c.u64();
        let sum_iat_us = c.u64();
        let sum_iat_sq_us = c.u64();
        let min_iat = c.u32();
        let max_iat = c.u32();
        let min_payload = c.u16();
        let max_payload = c.u16();
        let flags = c.u16();
        if pkt_count == 0 {
            return Err(FlowError::Format("flow record with zero packets".into()));
        }
        if flags & !Self::FLAG_EVICTED != 0 {
            return Err(FlowError::Format(format!("unknown flag bits {flags:#06x}")));
        }
        if min_payload > max_payload {
            return Err(FlowError::Format("min payload exceeds max payload".into()));
        }
        let (min_iat_us, max_iat_us) = if pkt_count < 2 {
            if min_iat != 0 || max_iat != 0 || sum_iat_us != 0 {
                return Err(FlowError::Format("inter-arrival data on single-packet flow".into()));
            }
            (None, None)
        } else {
            if min_iat > max_iat {
                return Err(FlowError::Format("min inter-arrival exceeds max".into()));
            }
            (Some(min_iat), Some(max_iat))
        };
        Ok(FlowRecord {
            key,
            pkt_count,
            byte_count,
            payload_bytes,
            sum_iat_us,
            sum_iat_sq_us,
            min_iat_us,
            max_iat_us,
            min_payload,
            max_payload,
            flags,
        })
    }
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Option<&[u8; N]> {
        let (head, rest) = self.0.split_first_chunk::<N>()?;
        self.0 = rest;
        Some(head)
    }
    fn u16(&mut self) -> u16 {
        u16::from_be_bytes(*self.take().expect("record length checked"))
    }
    fn u32(&mut self) -> u32 {
        u32::from_be_bytes(*self.take().expect("record length checked"))
    }
    fn u64(&mut self) -> u64 {
        u64::from_be_bytes(*self.take().expect("record length checked"))
    }
}

/// Per-window telemetry packet sent from the switch to the controller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportPacket {
    pub window_id: u32,
    pub flows: Vec<FlowRecord>,
}

impl ReportPacket {
    pub const MAGIC: u32 = 0x5034_4944;
    pub const VERSION: u8 = 1;
    pub const HEADER_LEN: usize = 11;
    pub const MAX_FLOWS: usize = u16::MAX as usize;

    pub fn wire_len(&self) -> usize {
        Self::HEADER_LEN + self.flows.len() * FlowRecord::WIRE_LEN
    }

    pub fn serialize(&self) -> Result<Vec<u8>, FlowError> {
        if self.flows.is_empty() {
            return Err(FlowError::Argument("report has no flows".into()));
        }
        let count = u16::try_from(self.flows.len())
            .map_err(|_| FlowError::Argument(format!("{} flows exceed one report", self.flows.len())))?;
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&Self::MAGIC.to_be_bytes());
        out.push(Self::VERSION);
        out.extend_from_slice(&self.window_id.to_be_bytes());
        out.extend_from_slice(&count.to_be_bytes());
        for f in &self.flows {
            f.write_to(&mut out);
        }
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, FlowError> {
        if bytes.len() < Self::HEADER_LEN {
            return Err(FlowError::Length { expected: Self::HEADER_LEN, actual: bytes.len() });
        }
        let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
        if magic != Self::MAGIC {
            return Err(FlowError::Format(format!("bad magic {magic:#010x}")));
        }
        if bytes[4] != Self::VERSION {
            return Err(FlowError::Version(bytes[4]));
        }
        let window_id = u32::from_be_bytes(bytes[5..9].try_into().unwrap());
        let count = u16::from_be_bytes(bytes[9..11].try_into().unwrap()) as usize;
        if count == 0 {
            return Err(FlowError::Format("report declares zero flows".into()));
        }
        let expected = Self::HEADER_LEN + count * FlowRecord::WIRE_LEN;
        if bytes.len() != expected {
            return Err(FlowError::Length { expected, actual: bytes.len() });
        }
        let flows = bytes[Self::HEADER_LEN..]
            .chunks_exact(FlowRecord::WIRE_LEN)
            .map(FlowRecord::read_from)
            .collect::<Result<_, _>>()?;
        Ok(ReportPacket { window_id, flows })
    }
}

/// Writes reports as a stream of length-prefixed (u32 big-endian) packets.
pub fn write_report_stream<W: Write>(mut w: W, reports: &[ReportPacket]) -> Result<(), FlowError> {
    for r in reports {
        let bytes = r.serialize()?;
        w.write_all(&(bytes.len() as u32).to_be_bytes())?;
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_stream<R: Read>(mut r: R) -> Result<Vec<ReportPacket>, FlowError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut rest = buf.as_slice();
    let mut out = Vec::new();
    while !rest.is_empty() {
        let Some((len, tail)) = rest.split_first_chunk::<4>() else {
            return Err(FlowError::Length { expected: 4, actual: rest.len() });
        };
        let len = u32::from_be_bytes(*len) as usize;
        if tail.len() < len {
            return Err(FlowError::Length { expected: len, actual: tail.len() });
        }
        out.push(ReportPacket::parse(&tail[..len])?);
        rest = &tail[len..];
    }
    Ok(out)
}

/// Controller-side view of flow state, reconstructed from reports.
///
/// Reports carry cumulative counters; this converts them to per-report
/// deltas so totals can be accumulated without double counting. An
/// evicted record ends that incarnation of the flow.
#[derive(Clone, Debug, Default)]
pub struct DeltaTracker {
    seen: HashMap<FlowKey, (u32, u64)>,
    pub total_packets: u64,
    pub total_bytes: u64,
}

impl DeltaTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the (packets, bytes) new since this flow was last reported.
    pub fn ingest(&mut self, rec: &FlowRecord) -> (u32, u64) {
        let (p0, b0) = self.seen.get(&rec.key).copied().unwrap_or((0, 0));
        let delta = (rec.pkt_count - p0, rec.byte_count - b0);
        if rec.evicted() {
            self.seen.remove(&rec.key);
        } else {
            self.seen.insert(rec.key, (rec.pkt_count, rec.byte_count));
        }
        self.total_packets += delta.0 as u64;
        self.total_bytes += delta.1;
        delta
    }

    pub fn ingest_report(&mut self, r: &ReportPacket) {
        for f in &r.flows {
            self.ingest(f);
        }
    }
}
