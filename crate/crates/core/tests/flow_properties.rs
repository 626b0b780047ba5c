use pdpids::flow::{FlowKey, FlowRecord, FlowTable, ReportPacket};
use proptest::prelude::*;

fn key(i: u32) -> FlowKey {
    FlowKey { src_ip: i, dst_ip: !i, src_port: 1, dst_port: 2, proto: 17 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_packet_lands_in_exactly_one_descriptor(
        pkts in prop::collection::vec((0u32..40, 0u16..1500, 0u64..100), 1..400),
        slot_bits in 2u32..8,
    ) {
        let mut t = FlowTable::with_slot_bits(slot_bits, 1);
        let mut ts = 0;
        let mut evicted_pkts = 0u64;
        for (k, p, dt) in &pkts {
            ts += dt;
            if let Some(ev) = t.collect_packet(key(*k), *p, ts).unwrap() {
                evicted_pkts += ev.pkt_count as u64;
            }
        }
        let live: u64 = t.rotate_window(0).iter().flat_map(|r| &r.flows).filter(|f| !f.evicted()).map(|f| f.pkt_count as u64).sum();
        prop_assert_eq!(live + evicted_pkts, pkts.len() as u64);
    }

    #[test]
    fn idle_windows_emit_nothing(n in 1u32..50) {
        let mut t = FlowTable::new(3);
        for i in 0..n {
            t.collect_packet(key(i), 10, i as u64).unwrap();
        }
        prop_assert!(!t.rotate_window(0).is_empty());
        prop_assert!(t.rotate_window(1).is_empty());
        prop_assert!(t.rotate_window(2).is_empty());
    }

    /// parse ∘ serialize on arbitrary bytes that happen to parse.
    #[test]
    fn parse_then_serialize_is_identity(
        window in any::<u32>(),
        body in prop::collection::vec(any::<u8>(), 63..=63 * 3),
        single in any::<bool>(),
    ) {
        let n = body.len() / 63;
        let mut bytes = vec![0x50, 0x34, 0x49, 0x44, 1];
        bytes.extend_from_slice(&window.to_be_bytes());
        bytes.extend_from_slice(&(n as u16).to_be_bytes());
        bytes.extend_from_slice(&body[..n * 63]);
        if single {
            // force a structurally valid single-packet record
            let off = 11;
            bytes[off + 13..off + 17].copy_from_slice(&1u32.to_be_bytes());
            for b in &mut bytes[off + 33..off + 49] { *b = 0; }
            for b in &mut bytes[off + 33 - 16..off + 33 - 8] { *b = 0; }
        }
        if let Ok(r) = ReportPacket::parse(&bytes) {
            prop_assert_eq!(r.serialize().unwrap(), bytes);
        }
    }

    #[test]
    fn serialize_then_parse_is_identity(
        window in any::<u32>(),
        recs in prop::collection::vec((any::<u32>(), 1u32..u32::MAX, any::<u64>(), any::<(u32, u32)>(), any::<(u16, u16)>(), any::<bool>()), 1..20),
    ) {
        let flows: Vec<FlowRecord> = recs.iter().map(|&(k, pkts, bytes, (a, b), (p, q), ev)| FlowRecord {
            key: key(k),
            pkt_count: pkts,
            byte_count: bytes,
            payload_bytes: bytes / 2,
            sum_iat_us: if pkts > 1 { bytes / 3 } else { 0 },
            sum_iat_sq_us: if pkts > 1 { bytes } else { 0 },
            min_iat_us: (pkts > 1).then_some(a.min(b)),
            max_iat_us: (pkts > 1).then_some(a.max(b)),
            min_payload: p.min(q),
            max_payload: p.max(q),
            flags: ev as u16,
        }).collect();
        let r = ReportPacket { window_id: window, flows };
        prop_assert_eq!(ReportPacket::parse(&r.serialize().unwrap()).unwrap(), r);
    }
}
