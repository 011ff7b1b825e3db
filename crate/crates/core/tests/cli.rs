use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mmrerank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmrerank"))
        .args(args)
        .output()
        .unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn synth(dir: &TempDir) {
    let out = mmrerank(&[
        "synth",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--corpus-size",
        "150",
        "--queries",
        "10",
        "--triplets",
        "100",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(p: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(Path::new(p)).unwrap()).unwrap()
}

#[test]
fn cost_model_table() {
    let out = mmrerank(&["cost-model"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "method,l,factor\ntop_k_clip,0,1.0000\nrerank_l10,10,1.2732\nrerank_l20,20,1.5464\ndirect_rs,1281,35.0000\n"
    );
}

#[test]
fn exit_codes() {
    assert_eq!(mmrerank(&["--help"]).status.code(), Some(0));
    assert_eq!(mmrerank(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mmrerank(&["cost-model", "--rho", "-1"]).status.code(), Some(1));

    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "nope.jsonl");
    let out = mmrerank(&["ingest", "--corpus", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));

    synth(&dir);
    let corpus = path(&dir, "corpus.jsonl");
    let queries = path(&dir, "queries.jsonl");
    let report = path(&dir, "r.json");
    let bad_format = mmrerank(&[
        "eval-retrieval", "--corpus", &corpus, "--queries", &queries,
        "--scorer", "planted:1", "--out", &report, "--format", "xml",
    ]);
    assert_eq!(bad_format.status.code(), Some(1));

    // a score table that covers nothing is a scorer failure
    let table = path(&dir, "scores.jsonl");
    std::fs::write(&table, "{\"query\":\"other\",\"entry_id\":\"e00000\",\"score\":0.5}\n").unwrap();
    let out = mmrerank(&[
        "eval-retrieval", "--corpus", &corpus, "--queries", &queries,
        "--scorer", &format!("table:{table}"), "--out", &report,
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unscored pair"));
}

#[test]
fn ingest_and_retrieve() {
    let dir = TempDir::new().unwrap();
    synth(&dir);
    let corpus = path(&dir, "corpus.jsonl");
    let out = mmrerank(&["ingest", "--corpus", &corpus]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["entries"], 150);
    assert_eq!(summary["dim"], 64);

    let queries = path(&dir, "queries.jsonl");
    let out = mmrerank(&[
        "retrieve", "--corpus", &corpus, "--queries", &queries,
        "--query", "synthetic query 0", "--scorer", "planted:7", "--l", "30",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let selected = r["selected"].as_array().unwrap();
    assert!(selected.len() <= 5);
    assert!(r["timing"]["scored_count"].as_u64().unwrap() <= 30);
    assert!(selected.iter().all(|c| c["rs"].as_f64().unwrap() >= 0.3));

    // no embedding source for a rerank query
    let out = mmrerank(&[
        "retrieve", "--corpus", &corpus, "--queries", &queries,
        "--query", "not in the file", "--scorer", "planted:7",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_scorer_merges_scorers() {
    let dir = TempDir::new().unwrap();
    synth(&dir);
    let out_path = path(&dir, "sep.json");
    let out = mmrerank(&[
        "eval-scorer", "--triplets", &path(&dir, "triplets.jsonl"),
        "--scorer", "planted:1", "--scorer", "clip-like:1:0.8", "--out", &out_path,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&out_path);
    let methods = r["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 2);
    assert_eq!(methods[0]["scalars"]["best_accuracy"], 1.0);
    assert!(methods[1]["scalars"]["best_accuracy"].as_f64().unwrap() < 0.8);
}

#[test]
fn eval_retrieval_and_e2e_write_reports() {
    let dir = TempDir::new().unwrap();
    synth(&dir);
    let corpus = path(&dir, "corpus.jsonl");
    let queries = path(&dir, "queries.jsonl");
    let csv = path(&dir, "r.csv");
    let out = mmrerank(&[
        "eval-retrieval", "--corpus", &corpus, "--queries", &queries,
        "--scorer", "planted:7", "--methods", "topk,rerank", "--l", "10,20,40",
        "--out", &csv, "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    for m in ["top_k_clip", "rerank_l10", "rerank_l20", "rerank_l40"] {
        assert!(text.contains(&format!("{m},mean_rs_at_depth,")), "{m}");
    }
    assert!(!text.contains("direct_rs"));

    let e2e = path(&dir, "e2e.json");
    let out = mmrerank(&[
        "eval-e2e", "--corpus", &corpus, "--queries", &queries,
        "--scorer", "planted:7", "--out", &e2e,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&e2e);
    assert_eq!(r["experiment"], "end_to_end");
    assert_eq!(r["config"]["responder"], "echo");
    assert_eq!(r["methods"].as_array().unwrap().len(), 4);
}
