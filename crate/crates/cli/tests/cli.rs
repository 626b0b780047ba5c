use std::path::Path;
use std::process::{Command, Output};

fn pdpids(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdpids")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_ENTROPY: &str = "pipeline = entropy\npps = 10000\nduration_s = 20\nwindow_log2 = 12\nwarmup_windows = 5\n";
const SMALL_CLASSIFIER: &str = "pipeline = classifier\nhosts = 50\nservers = 10\npps = 500\nduration_s = 4\n";

#[test]
fn run_entropy_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.cfg", SMALL_ENTROPY);
    let out = pdpids(&["run-entropy", "--config", &cfg, "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pipeline"], "entropy");
    assert_eq!(v["config"]["seed"], "3");
    let units = v["units"].as_u64().unwrap();
    let sum: u64 = ["tp", "fp", "tn", "fn"].iter().map(|k| v[k].as_u64().unwrap()).sum();
    assert_eq!(units, sum);

    let csv_path = dir.path().join("m.csv");
    let log = dir.path().join("alarms.jsonl");
    let out = pdpids(&[
        "run-entropy",
        "--config",
        &cfg,
        "--format",
        "csv",
        "--out",
        csv_path.to_str().unwrap(),
        "--alarm-log",
        log.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("pipeline,tp,fp,tn,fn,units,"));
    let lines = std::fs::read_to_string(&log).unwrap();
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    for k in ["window_id", "h_src_raw", "h_dst_raw", "src_upper_raw", "dst_lower_raw", "anomalous"] {
        assert!(first.get(k).is_some(), "missing {k}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "colour = blue\n");
    assert_eq!(pdpids(&["run-entropy", "--config", &bad]).status.code(), Some(2));
    let range = write(dir.path(), "range.cfg", "window_log2 = 60\n");
    assert_eq!(pdpids(&["run-entropy", "--config", &range]).status.code(), Some(2));
    assert_eq!(pdpids(&["run-entropy", "--config", "/no/such/file.cfg"]).status.code(), Some(2));
    assert_eq!(pdpids(&["run-entropy", "--format", "xml"]).status.code(), Some(2));
    let cls = write(dir.path(), "c.cfg", "pipeline = classifier\n");
    assert_eq!(pdpids(&["run-entropy", "--config", &cls]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(
        dir.path(),
        "t.csv",
        "ts_us,src_ip,dst_ip,src_port,dst_port,proto,payload_len,label\n1,10.0.0.999,10.0.0.1,1,2,6,3,0\n",
    );
    let cfg = write(dir.path(), "e.cfg", &format!("trace = {trace}\n"));
    let out = pdpids(&["run-entropy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = pdpids(&["run-entropy", "--config", write(dir.path(), "ok.cfg", SMALL_ENTROPY).as_str(), "--out", "/no/such/dir/m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/m.json"));
}

#[test]
fn gen_trace_is_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.cfg", "pps = 1000\nduration_s = 2\nattack_fraction = 0.1\n");
    let a = pdpids(&["gen-trace", "--config", &cfg, "--seed", "5"]);
    let b = pdpids(&["gen-trace", "--config", &cfg, "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("ts_us,src_ip,dst_ip,src_port,dst_port,proto,payload_len,label\n"));
    // 2000 benign packets; half of the merged stream precedes the attack
    let rows = text.lines().count() - 1;
    assert!(rows > 2000 && rows < 2200, "{rows}");

    // the generated file feeds straight back in as a trace
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, &text).unwrap();
    let run_cfg = write(
        dir.path(),
        "r.cfg",
        &format!("trace = {}\nwindow_log2 = 7\nwarmup_windows = 2\nattack_fraction = 0.1\n", trace.display()),
    );
    assert!(pdpids(&["run-entropy", "--config", &run_cfg]).status.success());
}

#[test]
fn compile_tree_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(
        dir.path(),
        "t.json",
        r#"{"n_features": 1, "width": 4, "root": {"feature": 0, "threshold": 5, "left": {"leaf": 0}, "right": {"leaf": 1}}}"#,
    );
    let out = pdpids(&["compile-tree", "--tree", &tree]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "priority=1 f0=[0,5] -> benign\npriority=0 f0=[6,15] -> ddos\n");
    let out = pdpids(&["compile-tree", "--tree", &tree, "--lpm"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "priority=1 f0={0/2,4/3} -> benign\npriority=0 f0={6/3,8/1} -> ddos\n"
    );
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"n_features": 1, "width": 4, "root": {"feature": 0, "threshold": 3,
            "left": {"feature": 0, "threshold": 7, "left": {"leaf": 0}, "right": {"leaf": 1}}, "right": {"leaf": 0}}}"#,
    );
    assert_eq!(pdpids(&["compile-tree", "--tree", &bad]).status.code(), Some(1));
    assert_eq!(pdpids(&["compile-tree", "--tree", "/no/tree.json"]).status.code(), Some(2));
}

#[test]
fn run_classifier_knn_and_forest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", SMALL_CLASSIFIER);
    let out = pdpids(&["run-classifier", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pipeline"], "classifier");
    assert!(v["accuracy"].as_f64().unwrap() > 0.8);

    // mean payload (feature 3) below ~64 bytes → ddos
    let tree = write(
        dir.path(),
        "t.json",
        r#"{"n_features": 8, "width": 8, "root": {"feature": 3, "threshold": 11, "left": {"leaf": 1}, "right": {"leaf": 0}}}"#,
    );
    let out = pdpids(&["run-classifier", "--config", &cfg, "--tree", &tree, "--tree", &tree]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["trees"], format!("{tree},{tree}"));
    assert_eq!(pdpids(&["run-classifier", "--tree", "/missing.json"]).status.code(), Some(2));
}
