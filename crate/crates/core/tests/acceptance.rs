//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

use std::collections::HashMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use pdpids::control::{knn_train, tree_compile, DecisionTree, FeatureVector, Node, N_FEATURES};
use pdpids::dataplane::OpBudget;
use pdpids::entropy::{CountSketch, EntropyPipeline, Estimator, ExactCounter, LogTable, SketchDims};
use pdpids::flow::{
    read_report_stream, write_report_stream, DeltaTracker, FlowCollector, FlowKey, FlowRecord, FlowTable,
    ReportPacket,
};
use pdpids::harness::{run_experiment, run_many, ExperimentConfig, MetricsReport, Pipeline};
use pdpids::traffic::Label;
use pdpids::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1, 2

fn entropy_runs() -> Vec<MetricsReport> {
    let cfgs: Vec<_> = (1..=3).map(|s| ExperimentConfig::defaults(Pipeline::Entropy).with_seed(s)).collect();
    for c in &cfgs {
        // the scenario as stated: 1000 hosts, Zipf 1.0, 10^6 packets, 4% from the midpoint, W = 2^13
        assert_eq!(c.synthetic.n_benign_hosts, 1000);
        assert_eq!(c.synthetic.zipf_s, 1.0);
        assert_eq!(c.detector.window.window_log2, 13);
        assert_eq!((c.attack.fraction, c.attack.onset), (0.04, 0.5));
    }
    run_many(&cfgs, Execution::default()).into_iter().map(|r| r.expect("entropy experiment")).collect()
}

fn criterion_1(runs: &[MetricsReport]) -> Outcome {
    let accs: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
    let total: u64 = runs[0].units;
    ensure(accs.iter().all(|a| *a >= 0.90), || format!("window accuracies {accs:?}"))?;
    let secs: f64 = runs.iter().map(|m| m.wall_clock_s).fold(0.0, f64::max);
    Ok(format!("accuracy {accs:?} over {total} evaluated windows/seed, slowest run {secs:.2}s"))
}

fn criterion_2(runs: &[MetricsReport]) -> Outcome {
    let delays: Vec<Option<u64>> = runs.iter().map(|m| m.detection_delay_windows).collect();
    ensure(delays.iter().all(|d| matches!(d, Some(0..=2))), || format!("delays {delays:?}"))?;
    let pk: Vec<_> = runs.iter().map(|m| m.detection_delay_packets).collect();
    Ok(format!("delay in windows {delays:?}, in packets {pk:?}"))
}

// ---------------------------------------------------------------- 3

fn shannon(window: &[u32]) -> f64 {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for k in window {
        *counts.entry(*k).or_default() += 1;
    }
    let n = window.len() as f64;
    counts.values().map(|&c| {
        let p = c as f64 / n;
        -p * p.log2()
    }).sum()
}

fn pipeline_entropies(est: Estimator, table: &Arc<LogTable>, log2w: u32, keys: &[u32]) -> Vec<f64> {
    let mut p = EntropyPipeline::new(est, table.clone(), log2w, 32).unwrap();
    let mut out = Vec::new();
    for k in keys {
        if p.observe(*k).unwrap() {
            out.push(p.close_window(&mut OpBudget::unlimited()).unwrap().raw() as f64 / 16.0);
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let log2w = 13u32;
    let w = 1usize << log2w;
    let table = Arc::new(LogTable::build(1 << 20, 8).unwrap());
    let mut worst_sketch = 0.0f64;
    let mut worst_exact = 0.0f64;
    let mut windows = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf = Zipf::new(10_000.0, 1.0).unwrap();
        let streams: [(&str, Vec<u32>); 3] = [
            ("zipf", (0..4 * w).map(|_| zipf.sample(&mut rng) as u32).collect()),
            ("uniform-1k", (0..4 * w).map(|_| rng.random_range(0..1000)).collect()),
            ("uniform-2^32", (0..4 * w).map(|_| rng.random()).collect()),
        ];
        for (name, keys) in &streams {
            let exact: Vec<f64> = keys.chunks_exact(w).map(shannon).collect();
            let sk = pipeline_entropies(
                Estimator::Sketch(CountSketch::new(SketchDims { rows: 4, cols: 2048 }, seed).unwrap()),
                &table,
                log2w,
                keys,
            );
            let ex = pipeline_entropies(Estimator::Exact(ExactCounter::new()), &table, log2w, keys);
            for ((h, s), e) in exact.iter().zip(&sk).zip(&ex) {
                let rel = (s - h).abs() / log2w as f64;
                ensure(rel <= 0.05, || format!("{name} seed {seed}: sketch {s} vs exact {h}"))?;
                let abs = (e - h).abs();
                ensure(abs <= log2w as f64 / 16.0, || format!("{name} seed {seed}: exact-count {e} vs {h}"))?;
                worst_sketch = worst_sketch.max(rel);
                worst_exact = worst_exact.max(abs);
                windows += 1;
            }
        }
    }
    Ok(format!(
        "{windows} windows; worst sketch error {:.2}% of log2 W, worst exact-count error {:.4} bits (bound {:.4})",
        worst_sketch * 100.0,
        worst_exact,
        log2w as f64 / 16.0
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let t = LogTable::build(1 << 20, 8).unwrap();
    let mut worst = (0.0f64, 0u64);
    for x in 2..=(1u64 << 20) {
        let got = t.lookup(x).ok_or_else(|| format!("no entry for {x}"))?.raw() as f64 / 16.0;
        let want = x as f64 * (x as f64).log2();
        let rel = (got - want).abs() / want;
        if rel > worst.0 {
            worst = (rel, x);
        }
    }
    ensure(worst.0 <= 0.01, || format!("relative error {} at x = {}", worst.0, worst.1))?;
    Ok(format!("max relative error {:.4}% at x = {} with {} entries", worst.0 * 100.0, worst.1, t.len()))
}

// ---------------------------------------------------------------- 5

/// Independent KNN: min-max scaling, full sort by (distance, index),
/// majority with ties to ddos.
fn knn_oracle(rows: &[([f64; N_FEATURES], Label)], q: &[f64; N_FEATURES], k: usize) -> Label {
    let mut lo = [f64::INFINITY; N_FEATURES];
    let mut hi = [f64::NEG_INFINITY; N_FEATURES];
    for (r, _) in rows {
        for i in 0..N_FEATURES {
            lo[i] = lo[i].min(r[i]);
            hi[i] = hi[i].max(r[i]);
        }
    }
    let norm = |v: &[f64; N_FEATURES]| -> Vec<f64> {
        (0..N_FEATURES).map(|i| if hi[i] > lo[i] { (v[i] - lo[i]) / (hi[i] - lo[i]) } else { 0.0 }).collect()
    };
    let nq = norm(q);
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, (r, _))| (norm(r).iter().zip(&nq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let ddos = d[..k].iter().filter(|(_, i)| rows[*i].1 == Label::Ddos).count();
    if ddos * 2 >= k {
        Label::Ddos
    } else {
        Label::Benign
    }
}

fn criterion_5a() -> Outcome {
    let mut queries = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(1..=200usize);
        let nf = rng.random_range(1..=N_FEATURES);
        // coarse integer grids make distance ties common
        let grid = rng.random_bool(0.5);
        let sample = |rng: &mut ChaCha8Rng| -> [f64; N_FEATURES] {
            std::array::from_fn(|i| {
                if i >= nf {
                    0.0
                } else if grid {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random_range(0.0..1000.0)
                }
            })
        };
        let rows: Vec<([f64; N_FEATURES], Label)> = (0..n)
            .map(|_| (sample(&mut rng), if rng.random_bool(0.4) { Label::Ddos } else { Label::Benign }))
            .collect();
        let train: Vec<(FeatureVector, Label)> = rows.iter().map(|(r, l)| (FeatureVector(*r), *l)).collect();
        let ds = knn_train(&train).unwrap();
        for _ in 0..20 {
            let q = sample(&mut rng);
            let k = rng.random_range(1..=n.min(15));
            let got = ds.classify(&FeatureVector(q), k).unwrap();
            let want = knn_oracle(&rows, &q, k);
            ensure(got == want, || format!("seed {seed}: k={k} got {got} want {want}"))?;
            queries += 1;
        }
    }
    Ok(format!("100 instances, {queries} queries, 0 disagreements with brute force"))
}

fn criterion_5b() -> Outcome {
    let m = run_experiment(&ExperimentConfig::defaults(Pipeline::Classifier)).map_err(|e| e.to_string())?;
    ensure(m.accuracy >= 0.90, || format!("accuracy {}", m.accuracy))?;
    Ok(format!(
        "flow-level accuracy {:.4} (precision {:.4}, recall {:.4}) over {} flow records",
        m.accuracy, m.precision, m.recall, m.units
    ))
}

// ---------------------------------------------------------------- 6

fn random_tree(rng: &mut ChaCha8Rng, ranges: [(u32, u32); 2], depth: u32) -> Node {
    let splittable: Vec<usize> = (0..2).filter(|&f| ranges[f].0 < ranges[f].1).collect();
    if depth == 0 || splittable.is_empty() || rng.random_bool(0.15) {
        return Node::Leaf { leaf: if rng.random_bool(0.5) { Label::Ddos } else { Label::Benign } };
    }
    let f = splittable[rng.random_range(0..splittable.len())];
    let (lo, hi) = ranges[f];
    let t = rng.random_range(lo..hi);
    let mut l = ranges;
    l[f].1 = t;
    let mut r = ranges;
    r[f].0 = t + 1;
    Node::Split {
        feature: f,
        threshold: t,
        left: Box::new(random_tree(rng, l, depth - 1)),
        right: Box::new(random_tree(rng, r, depth - 1)),
    }
}

fn criterion_6() -> Outcome {
    let mut rules = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = rng.random_range(1..=6);
        let tree = DecisionTree::new(2, 8, random_tree(&mut rng, [(0, 255); 2], depth)).unwrap();
        let prog = tree_compile(&tree).map_err(|e| e.to_string())?;
        let lpm = prog.lpm_form();
        rules += prog.rules.len();
        for a in 0..256u32 {
            for b in 0..256u32 {
                let want = tree.eval(&[a, b]);
                let got = prog.classify(&[a, b]).map_err(|e| e.to_string())?;
                ensure(got == want, || format!("tree {seed} at ({a},{b}): table {got}, tree {want}"))?;
                let got = prog.classify_lpm(&lpm, &[a, b]).map_err(|e| e.to_string())?;
                ensure(got == want, || format!("tree {seed} at ({a},{b}): lpm {got}, tree {want}"))?;
            }
        }
    }
    Ok(format!("50 trees, {rules} rules, 2 x 50 x 65536 lookups identical to tree evaluation"))
}

// ---------------------------------------------------------------- 7

fn random_record(rng: &mut ChaCha8Rng) -> FlowRecord {
    let pkts = if rng.random_bool(0.3) { 1 } else { rng.random_range(2..=u32::MAX) };
    let (min_iat, max_iat, sum_iat, sum_sq) = if pkts < 2 {
        (None, None, 0, 0)
    } else {
        let a: u32 = rng.random();
        let b: u32 = rng.random();
        (Some(a.min(b)), Some(a.max(b)), rng.random(), rng.random())
    };
    let p1: u16 = rng.random();
    let p2: u16 = rng.random();
    FlowRecord {
        key: FlowKey {
            src_ip: rng.random(),
            dst_ip: rng.random(),
            src_port: rng.random(),
            dst_port: rng.random(),
            proto: rng.random(),
        },
        pkt_count: pkts,
        byte_count: rng.random(),
        payload_bytes: rng.random(),
        sum_iat_us: sum_iat,
        sum_iat_sq_us: sum_sq,
        min_iat_us: min_iat,
        max_iat_us: max_iat,
        min_payload: p1.min(p2),
        max_payload: p1.max(p2),
        flags: rng.random_range(0..2),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut reports = Vec::new();
    for _ in 0..10_000 {
        let n = rng.random_range(1..=24);
        let r = ReportPacket { window_id: rng.random(), flows: (0..n).map(|_| random_record(&mut rng)).collect() };
        let bytes = r.serialize().map_err(|e| e.to_string())?;
        ensure(bytes.len() == 11 + 63 * n, || format!("{} bytes for {n} flows", bytes.len()))?;
        let back = ReportPacket::parse(&bytes).map_err(|e| e.to_string())?;
        ensure(back == r, || "round trip changed the report".into())?;
        reports.push(r);
    }
    let mut buf = Vec::new();
    write_report_stream(&mut buf, &reports).map_err(|e| e.to_string())?;
    ensure(read_report_stream(buf.as_slice()).map_err(|e| e.to_string())? == reports, || "stream".into())?;

    let one = ReportPacket { window_id: 1, flows: vec![random_record(&mut rng)] }.serialize().unwrap();
    ensure(one.len() == 74, || format!("1-flow report is {} bytes", one.len()))?;
    let magic = u32::from_be_bytes(one[..4].try_into().unwrap());
    ensure(magic == 0x5034_4944, || format!("magic {magic:#x}"))?;
    Ok("10^4 random reports round-trip; 1-flow report is 74 bytes with magic 0x50344944".into())
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let mut detail = Vec::new();
    for (seed, n_flows, slot_bits) in [(1u64, 4096usize, 16u32), (2, 4096, 10), (3, 1000, 8), (4, 64, 4)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys: Vec<FlowKey> = (0..n_flows)
            .map(|_| FlowKey {
                src_ip: rng.random(),
                dst_ip: rng.random(),
                src_port: rng.random(),
                dst_port: rng.random(),
                proto: 6,
            })
            .collect();
        let n_pkts = 50_000u64;
        let mut col = FlowCollector::new(FlowTable::with_slot_bits(slot_bits, seed), 100_000).unwrap();
        let mut tracker = DeltaTracker::new();
        let mut ts = 0u64;
        let mut evictions = 0;
        for _ in 0..n_pkts {
            ts += rng.random_range(0..40);
            let k = keys[rng.random_range(0..n_flows)];
            for r in col.push(k, rng.random_range(0..1500), ts).map_err(|e| e.to_string())? {
                evictions += r.flows.iter().filter(|f| f.evicted()).count();
                tracker.ingest_report(&r);
            }
        }
        for r in col.finish().map_err(|e| e.to_string())? {
            evictions += r.flows.iter().filter(|f| f.evicted()).count();
            tracker.ingest_report(&r);
        }
        ensure(tracker.total_packets == n_pkts, || {
            format!("seed {seed}: reported {} of {n_pkts} packets", tracker.total_packets)
        })?;
        detail.push(format!("{n_flows} flows/2^{slot_bits} slots: {evictions} evictions"));
    }
    Ok(format!("reported deltas equal trace packet counts ({})", detail.join("; ")))
}

// ---------------------------------------------------------------- 9

fn criterion_9(runs: &[MetricsReport]) -> Outcome {
    // Each run enforces the limit per packet and fails on any violation;
    // here we also check the recorded peaks.
    let peaks: Vec<Option<u32>> = runs.iter().map(|m| m.peak_packet_ops).collect();
    ensure(peaks.iter().all(|p| matches!(p, Some(1..=32))), || format!("peaks {peaks:?}"))?;
    let close: Vec<Option<u32>> = runs.iter().map(|m| m.peak_close_ops).collect();
    Ok(format!("peak per-packet ops per pipeline {peaks:?} (limit 32); window-close pass {close:?}"))
}

// ---------------------------------------------------------------- 10

fn criterion_10(first: &[MetricsReport]) -> Outcome {
    let mut cfgs: Vec<_> = (1..=3).map(|s| ExperimentConfig::defaults(Pipeline::Entropy).with_seed(s)).collect();
    cfgs.push(ExperimentConfig::defaults(Pipeline::Classifier).with_seed(4));
    cfgs.push(ExperimentConfig::defaults(Pipeline::Classifier).with_seed(4));
    let again: Vec<MetricsReport> = run_many(&cfgs, Execution::default())
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for (a, b) in first.iter().zip(&again) {
        ensure(a.same_outcome(b), || format!("entropy seed {} differs", a.config["seed"]))?;
    }
    ensure(again[3].same_outcome(&again[4]), || "classifier runs differ".into())?;
    // serialized forms, too
    let strip = |m: &MetricsReport| MetricsReport { wall_clock_s: 0.0, ..m.clone() }.to_json();
    ensure(strip(&first[0]) == strip(&again[0]), || "json differs".into())?;
    Ok("3 entropy + 1 classifier configurations re-run with bit-identical metrics".into())
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let start = Instant::now();
    let mut failed = 0;
    let mut report = |n: &str, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(&mut *f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let mut out = std::io::stdout().lock();
        writeln!(out, "criterion {n:<3} {tag}  {name}: {detail} [{:.1}s]", t.elapsed().as_secs_f64()).unwrap();
    };

    let runs = entropy_runs();
    report("1", "entropy detector accuracy", &mut || criterion_1(&runs));
    report("2", "detection delay", &mut || criterion_2(&runs));
    report("3", "entropy estimation fidelity", &mut criterion_3);
    report("4", "log-table error bound", &mut criterion_4);
    report("5a", "KNN vs brute-force oracle", &mut criterion_5a);
    report("5b", "end-to-end flow classifier", &mut criterion_5b);
    report("6", "tree-to-table equivalence", &mut criterion_6);
    report("7", "report packet format", &mut criterion_7);
    report("8", "flow-count conservation", &mut criterion_8);
    report("9", "data-plane op budget", &mut || criterion_9(&runs));
    report("10", "determinism", &mut || criterion_10(&runs));

    println!("acceptance: {} failed, total {:.1}s", failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
