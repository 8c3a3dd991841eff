use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thoughtlens"))
        .args(args)
        .env("RUST_LOG", "off")
        .env_remove("JUDGE_API_KEY")
        .env_remove("JUDGE_BASE_URL")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn corpus() -> [PathBuf; 2] {
    [fixture("corpus/flash-128.jsonl"), fixture("corpus/flash-dynamic.jsonl")]
}

#[test]
fn evaluate_is_byte_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let [a, b] = corpus();
    let (o1, o2) = (tmp.path().join("one"), tmp.path().join("two"));
    for (out, workers) in [(&o1, "1"), (&o2, "4")] {
        let res = run(&["evaluate", "--input", s(&a), s(&b), "--out", s(out), "--workers", workers]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let (t1, t2) = (read_tree(&o1), read_tree(&o2));
    assert_eq!(t1.len(), 6);
    assert_eq!(t1, t2);
}

#[test]
fn worked_example_scene_scores_point_eight_three() {
    let tmp = tempfile::tempdir().unwrap();
    let [a, _] = corpus();
    let res = run(&["evaluate", "--input", s(&a), "--out", s(tmp.path())]);
    assert!(res.status.success());
    let text = fs::read_to_string(tmp.path().join("scenes/flash-128.jsonl")).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 12);
    let s01 = rows.iter().find(|r| r["scene_id"] == "s01").unwrap();
    let f1 = s01["alignment"]["f1"].as_f64().unwrap();
    assert!((f1 - 0.8333).abs() < 1e-4);
    let digest = s01["config_digest"].as_str().unwrap();
    let reports: Value = serde_json::from_slice(&fs::read(tmp.path().join("reports.json")).unwrap()).unwrap();
    assert_eq!(reports["provenance"]["config_digest"], digest);
    assert_eq!(reports["provenance"]["meta_patterns_version"], "v1");
    assert_eq!(reports["reports"][0]["err_pct"].as_f64().unwrap(), 100.0 / 12.0);
}

#[test]
fn missing_input_exits_two_and_names_the_path() {
    let res = run(&["evaluate", "--input", "/no/such/scenes.jsonl"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/no/such/scenes.jsonl"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["evaluate", "--workers", "many"]).status.code(), Some(2));
    let [a, _] = corpus();
    assert_eq!(run(&["evaluate", "--input", s(&a), "--workers", "0"]).status.code(), Some(2));
    assert_eq!(run(&["compare", "--input", s(&a)]).status.code(), Some(2));
    assert_eq!(run(&["collect", "--input", s(&a), "--mock"]).status.code(), Some(2));
}

#[test]
fn judge_backend_without_credentials_is_a_config_error() {
    let [a, _] = corpus();
    let res = run(&["evaluate", "--input", s(&a), "--backend", "judge"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("JUDGE_API_KEY"));
}

#[test]
fn unusable_data_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    let res = run(&["evaluate", "--input", s(&bad), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn mocked_judge_agrees_with_deterministic_backend() {
    let tmp = tempfile::tempdir().unwrap();
    let [a, _] = corpus();
    let det = tmp.path().join("det");
    let judge = tmp.path().join("judge");
    assert!(run(&["evaluate", "--input", s(&a), "--out", s(&det)]).status.success());
    let res = run(&["evaluate", "--input", s(&a), "--out", s(&judge), "--backend", "judge", "--mock"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let f1 = |dir: &Path| -> Vec<f64> {
        fs::read_to_string(dir.join("scenes/flash-128.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap())
            .filter_map(|v| v["alignment"]["f1"].as_f64())
            .collect()
    };
    assert_eq!(f1(&det), f1(&judge));
}

#[test]
fn similarity_on_duplicated_runs_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let [_, b] = corpus();
    let res = run(&["similarity", "--input", s(&b), s(&b), "--out", s(tmp.path())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value =
        serde_json::from_slice(&fs::read(tmp.path().join("determinism-flash-dynamic.json")).unwrap()).unwrap();
    assert_eq!(report["mean"].as_f64(), Some(1.0));
    assert_eq!(report["flagged"].as_array().unwrap().len(), 0);
    let csv = fs::read_to_string(tmp.path().join("similarity-matrix.csv")).unwrap();
    assert!(csv.contains("rerun,flash-dynamic,flash-dynamic-rerun,12,0,1\n"));
}

#[test]
fn compare_writes_shift_table() {
    let tmp = tempfile::tempdir().unwrap();
    let [a, b] = corpus();
    let res = run(&["compare", "--input", s(&a), s(&b), "--out", s(tmp.path())]);
    assert!(res.status.success());
    let csv = fs::read_to_string(tmp.path().join("entity-shift.csv")).unwrap();
    assert!(csv.starts_with("label,freq_a,freq_b,delta\n"));
    let doc: Value = serde_json::from_slice(&fs::read(tmp.path().join("entity-shift.json")).unwrap()).unwrap();
    assert_eq!(doc["shift"]["agreement"].as_f64(), Some(1.0));
    assert_eq!(doc["shift"]["shared_scenes"], 11);
}

#[test]
fn report_reproduces_evaluate_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    let [a, b] = corpus();
    let eval = tmp.path().join("eval");
    assert!(run(&["evaluate", "--input", s(&a), s(&b), "--out", s(&eval)]).status.success());
    let rep = tmp.path().join("rep");
    let res = run(&[
        "report",
        "--input",
        s(&eval.join("scenes/flash-128.jsonl")),
        s(&eval.join("scenes/flash-dynamic.jsonl")),
        "--out",
        s(&rep),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["reports.csv", "reports.json", "scaling.csv"] {
        assert_eq!(fs::read(eval.join(f)).unwrap(), fs::read(rep.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn collect_then_evaluate_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let req = fixture("collect/requests.jsonl");
    let res = run(&["collect", "--input", s(&req), "--variant", "lite-512", "--mock", "--out", s(tmp.path())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let records = tmp.path().join("records/lite-512.jsonl");
    assert_eq!(fs::read_to_string(&records).unwrap().lines().count(), 6);
    let out = tmp.path().join("eval");
    assert!(run(&["evaluate", "--input", s(&records), "--out", s(&out)]).status.success());
}

#[test]
fn config_file_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let [a, _] = corpus();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "inputs": [a],
            "cascade": {"token_sort_threshold": 90.0, "partial_threshold": 90.0},
            "workers": 2,
            "out_dir": "from-config"
        })
        .to_string(),
    )
    .unwrap();
    let res = run(&["evaluate", "--config", s(&cfg)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(tmp.path().join("from-config/reports.csv").is_file());

    let res = run(&["evaluate", "--config", s(&cfg), "--out", s(&tmp.path().join("flag"))]);
    assert!(res.status.success());
    assert!(tmp.path().join("flag/reports.csv").is_file());

    fs::write(&cfg, r#"{"cascade": {"token_sort_threshold": 120, "partial_threshold": 75}, "inputs": []}"#).unwrap();
    assert_eq!(run(&["evaluate", "--config", s(&cfg), "--input", s(&a)]).status.code(), Some(2));
}
