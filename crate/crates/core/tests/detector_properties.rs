use pdpids::dataplane::FixedPoint;
use pdpids::detector::{AlarmPolicy, Detector, DetectorConfig, WindowConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

fn small(warmup: u32, policy: AlarmPolicy, k: i32) -> DetectorConfig {
    DetectorConfig {
        window: WindowConfig { window_log2: 8, warmup_windows: warmup },
        policy,
        k: FixedPoint::from_raw(k),
        ..DetectorConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_result_per_window_and_quiet_warmup(n in 0usize..5000, warmup in 1u32..8, seed in any::<u64>()) {
        // k = 0 with OR: any movement alarms, so quiet warm-up is meaningful
        let mut det = Detector::new(small(warmup, AlarmPolicy::Or, 0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut results = Vec::new();
        for _ in 0..n {
            if let Some(r) = det.process_packet(rng.random_range(0..300), rng.random_range(0..50)).unwrap() {
                results.push(r);
            }
        }
        prop_assert_eq!(results.len(), n / 256);
        for (i, r) in results.iter().enumerate() {
            prop_assert_eq!(r.window_id, i as u64);
            if i < warmup as usize {
                prop_assert!(r.alarm.is_none() && !r.anomalous && r.thresholds.is_none());
            }
        }
    }
}

/// Benign Zipf phase, then the same plus spoofed sources aimed at one
/// destination; exact counting.
#[test]
fn two_phase_stream_alarms_within_two_windows() {
    let w = 1usize << 13;
    for (seed, fraction) in [(1u64, 0.04), (2, 0.06), (3, 0.1)] {
        let cfg = DetectorConfig { exact_counting: true, seed, ..DetectorConfig::default() };
        let mut det = Detector::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hosts = Zipf::new(1000.0, 1.0).unwrap();
        let servers = Zipf::new((1u32 << 18) as f64, 1.0).unwrap();
        let change = 40;
        let mut first_alarm = None;
        for i in 0..60 * w {
            let attack = i >= change * w && rng.random_bool(fraction);
            let (s, d) = if attack {
                (rng.random(), 0xdead_beef)
            } else {
                (hosts.sample(&mut rng) as u32, servers.sample(&mut rng) as u32)
            };
            if let Some(r) = det.process_packet(s, d).unwrap() {
                if r.alarm.is_some() && first_alarm.is_none() {
                    first_alarm = Some(r.window_id);
                }
            }
        }
        let a = first_alarm.expect("alarm raised");
        assert!((change as u64..=change as u64 + 2).contains(&a), "seed {seed}: first alarm in window {a}");
    }
}

#[test]
fn identical_streams_give_identical_state() {
    let run = || {
        let mut det = Detector::new(DetectorConfig { seed: 9, ..small(3, AlarmPolicy::And, 48) }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut out = Vec::new();
        for _ in 0..20_000 {
            out.extend(det.process_packet(rng.random_range(0..200), rng.random_range(0..2000)).unwrap());
        }
        (out, *det.model())
    };
    assert_eq!(run(), run());
}
