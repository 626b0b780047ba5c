use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Zipf};
use serde::{Deserialize, Serialize};

use crate::dataplane::hash_lane;
use crate::flow::{FlowKey, PROTO_TCP, PROTO_UDP};

use super::{Label, TraceError, TraceRecord};

/// First benign host address (10.0.0.0/8).
pub const HOST_BASE: u32 = 0x0a00_0000;
/// First server address (172.0.0.0/8).
pub const SERVER_BASE: u32 = 0xac00_0000;
const MAX_POPULATION: u32 = 1 << 24;
const SERVICE_PORTS: [u16; 8] = [80, 443, 53, 22, 25, 123, 8080, 3306];
const PORT_SALT: u64 = 0x5eed_f00d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_benign_hosts: u32,
    pub n_servers: u32,
    pub zipf_s: f64,
    pub pkts_per_second: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_benign_hosts: 1000,
            n_servers: 1 << 18,
            zipf_s: 1.0,
            pkts_per_second: 10_000.0,
            duration_s: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Number of packets the generator emits: rate × duration, rounded.
    pub fn packet_count(&self) -> u64 {
        (self.pkts_per_second * self.duration_s).round() as u64
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Argument(m.into()));
        if !(1..=MAX_POPULATION).contains(&self.n_benign_hosts) {
            return bad("n_benign_hosts must be in [1, 2^24]");
        }
        if !(1..=MAX_POPULATION).contains(&self.n_servers) {
            return bad("n_servers must be in [1, 2^24]");
        }
        if !(self.zipf_s.is_finite() && self.zipf_s >= 0.0) {
            return bad("zipf_s must be finite and non-negative");
        }
        if !(self.pkts_per_second.is_finite() && self.pkts_per_second > 0.0) {
            return bad("pkts_per_second must be positive");
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.packet_count() == 0 {
            return bad("duration_s must yield at least one packet");
        }
        Ok(())
    }
}

/// Sequential benign traffic source; see [`generate_benign`].
pub struct BenignGenerator {
    rng: ChaCha8Rng,
    hosts: Zipf<f64>,
    servers: Zipf<f64>,
    gaps: Exp<f64>,
    t_us: f64,
    remaining: u64,
}

impl BenignGenerator {
    pub fn new(cfg: &SyntheticConfig) -> Result<Self, TraceError> {
        cfg.validate()?;
        let arg = |e: rand_distr::ZipfError| TraceError::Argument(e.to_string());
        Ok(BenignGenerator {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            hosts: Zipf::new(cfg.n_benign_hosts as f64, cfg.zipf_s).map_err(arg)?,
            servers: Zipf::new(cfg.n_servers as f64, cfg.zipf_s).map_err(arg)?,
            gaps: Exp::new(cfg.pkts_per_second / 1e6).map_err(|e| TraceError::Argument(e.to_string()))?,
            t_us: 0.0,
            remaining: cfg.packet_count(),
        })
    }
}

fn service_port(server: u32) -> u16 {
    let i = hash_lane(&server.to_be_bytes(), PORT_SALT, SERVICE_PORTS.len() as u64).expect("non-zero modulus");
    SERVICE_PORTS[i as usize]
}

fn client_port(src: u32, dst: u32) -> u16 {
    let mut b = [0u8; 8];
    b[..4].copy_from_slice(&src.to_be_bytes());
    b[4..].copy_from_slice(&dst.to_be_bytes());
    1024 + hash_lane(&b, PORT_SALT, 64512).expect("non-zero modulus") as u16
}

impl Iterator for BenignGenerator {
    type Item = TraceRecord;

    fn next(&mut self) -> Option<TraceRecord> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let ts_us = self.t_us as u64;
        self.t_us += self.gaps.sample(&mut self.rng);
        let src = HOST_BASE + self.hosts.sample(&mut self.rng) as u32 - 1;
        let dst = SERVER_BASE + self.servers.sample(&mut self.rng) as u32 - 1;
        let dst_port = service_port(dst);
        let proto = if matches!(dst_port, 53 | 123) { PROTO_UDP } else { PROTO_TCP };
        Some(TraceRecord {
            ts_us,
            key: FlowKey { src_ip: src, dst_ip: dst, src_port: client_port(src, dst), dst_port, proto },
            payload_len: self.rng.random_range(64..=1400),
            label: Some(Label::Benign),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

/// Benign trace: Zipf-popular hosts and servers, uniform payloads in
/// [64, 1400], exponential inter-arrival gaps. Pure function of `cfg`.
pub fn generate_benign(cfg: &SyntheticConfig) -> Result<Vec<TraceRecord>, TraceError> {
    Ok(BenignGenerator::new(cfg)?.collect())
}

/// Volumetric attack: spoofed uniformly random sources aimed at one service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    /// Share of attack packets in the attacked part of the stream.
    pub fraction: f64,
    /// Only `dst_ip`, `dst_port` and `proto` are used.
    pub target: FlowKey,
    /// Position in the merged stream, in [0, 1), where the attack begins.
    pub onset: f64,
    /// Attack payload lengths are uniform in `[0, max_payload)`.
    pub max_payload: u16,
}

impl AttackSpec {
    pub fn new(fraction: f64, target: FlowKey) -> Self {
        AttackSpec { fraction, target, onset: 0.0, max_payload: 64 }
    }

    /// Default victim: the first server, UDP port 53.
    pub fn default_target() -> FlowKey {
        FlowKey { src_ip: 0, dst_ip: SERVER_BASE, src_port: 0, dst_port: 53, proto: PROTO_UDP }
    }
}

/// Interleaves attack packets (labeled ddos) into a benign stream.
///
/// With `n` benign packets after the onset, `round(f·n/(1−f))` attack
/// packets are placed at uniformly random positions among them, so the
/// attacked segment carries fraction `f`. Attack packets take the
/// timestamp of the preceding record, keeping the stream ordered. The
/// onset index is chosen so the attack starts at `onset` of the merged
/// length. Unlabeled input records are labeled benign.
pub fn inject_attack(benign: &[TraceRecord], spec: &AttackSpec, seed: u64) -> Result<Vec<TraceRecord>, TraceError> {
    let f = spec.fraction;
    if !(0.0..1.0).contains(&f) {
        return Err(TraceError::Argument(format!("attack fraction {f} outside [0, 1)")));
    }
    if !(0.0..1.0).contains(&spec.onset) {
        return Err(TraceError::Argument(format!("attack onset {} outside [0, 1)", spec.onset)));
    }
    if spec.max_payload == 0 {
        return Err(TraceError::Argument("max_payload must be positive".into()));
    }
    let b = benign.len();
    let s = spec.onset;
    let before = ((s * b as f64) / ((1.0 - f) + s * f)).round().min(b as f64) as usize;
    let after = b - before;
    let attacks = (f * after as f64 / (1.0 - f)).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots = sample(&mut rng, after + attacks, attacks).into_vec();
    slots.sort_unstable();

    let relabel = |r: &TraceRecord| TraceRecord { label: Some(r.label.unwrap_or(Label::Benign)), ..*r };
    let mut out = Vec::with_capacity(b + attacks);
    out.extend(benign[..before].iter().map(relabel));
    let mut tail = benign[before..].iter();
    let mut slots = slots.into_iter().peekable();
    for pos in 0..after + attacks {
        if slots.peek() == Some(&pos) {
            slots.next();
            let ts_us = out
                .last()
                .map(|r: &TraceRecord| r.ts_us)
                .or_else(|| benign.get(before).map(|r| r.ts_us))
                .unwrap_or(0);
            out.push(TraceRecord {
                ts_us,
                key: FlowKey {
                    src_ip: rng.random(),
                    dst_ip: spec.target.dst_ip,
                    src_port: rng.random(),
                    dst_port: spec.target.dst_port,
                    proto: spec.target.proto,
                },
                payload_len: rng.random_range(0..spec.max_payload),
                label: Some(Label::Ddos),
            });
        } else {
            out.push(relabel(tail.next().expect("slot accounting")));
        }
    }
    Ok(out)
}

/// Per-window ground truth over consecutive blocks of `window_len` records:
/// a window is anomalous iff its attack share exceeds half of `fraction`.
/// A trailing partial window is not labeled.
pub fn ground_truth_windows(records: &[TraceRecord], window_len: usize, fraction: f64) -> Vec<bool> {
    assert!(window_len > 0, "window length must be positive");
    records
        .chunks_exact(window_len)
        .map(|w| {
            let attacks = w.iter().filter(|r| r.is_attack()).count();
            attacks as f64 / window_len as f64 > 0.5 * fraction
        })
        .collect()
}
