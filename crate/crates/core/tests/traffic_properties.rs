use pdpids::traffic::{generate_benign, ground_truth_windows, inject_attack, AttackSpec, Label, SyntheticConfig};
use proptest::prelude::*;

fn small(seed: u64, zipf_s: f64) -> SyntheticConfig {
    SyntheticConfig {
        n_benign_hosts: 50,
        n_servers: 200,
        zipf_s,
        pkts_per_second: 2000.0,
        duration_s: 1.0,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn merged_stream_is_ordered_and_accounts_for_every_packet(
        seed in any::<u64>(),
        fraction in 0.0f64..0.9,
        onset in 0.0f64..0.99,
    ) {
        let benign = generate_benign(&small(seed, 1.0)).unwrap();
        let spec = AttackSpec { onset, ..AttackSpec::new(fraction, AttackSpec::default_target()) };
        let merged = inject_attack(&benign, &spec, seed ^ 1).unwrap();
        prop_assert!(merged.windows(2).all(|w| w[0].ts_us <= w[1].ts_us));
        let benign_out: Vec<_> = merged.iter().filter(|r| !r.is_attack()).map(|r| (r.ts_us, r.key, r.payload_len)).collect();
        let benign_in: Vec<_> = benign.iter().map(|r| (r.ts_us, r.key, r.payload_len)).collect();
        prop_assert_eq!(benign_out, benign_in);
        prop_assert!(merged.iter().all(|r| r.label.is_some()));
        for r in merged.iter().filter(|r| r.label == Some(Label::Ddos)) {
            prop_assert!(r.payload_len < spec.max_payload);
            prop_assert_eq!(r.key.dst_ip, spec.target.dst_ip);
        }
    }

    /// Generation and injection are pure functions of their inputs, so the
    /// ground truth derived from them is too.
    #[test]
    fn generation_and_ground_truth_are_reproducible(
        seed in any::<u64>(),
        zipf_s in 0.0f64..2.0,
        fraction in 0.01f64..0.5,
        window_log2 in 4u32..9,
    ) {
        let spec = AttackSpec { onset: 0.5, ..AttackSpec::new(fraction, AttackSpec::default_target()) };
        let run = || {
            let t = inject_attack(&generate_benign(&small(seed, zipf_s)).unwrap(), &spec, seed).unwrap();
            let g = ground_truth_windows(&t, 1 << window_log2, fraction);
            (t, g)
        };
        let (t1, g1) = run();
        let (t2, g2) = run();
        prop_assert_eq!(t1, t2);
        prop_assert_eq!(g1, g2);
    }
}

#[test]
fn no_attack_means_no_anomalous_windows() {
    let t = inject_attack(&generate_benign(&small(9, 1.0)).unwrap(), &AttackSpec::new(0.0, AttackSpec::default_target()), 9)
        .unwrap();
    assert!(ground_truth_windows(&t, 64, 0.1).iter().all(|&a| !a));
}
