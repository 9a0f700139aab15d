use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tsc-spoiler");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// synth, preprocess, train-embeddings and train on 20 small videos.
fn pipeline(dir: &Path) {
    ok(dir, &["synth", "--videos", "20", "--comments", "200", "--seed", "5", "--out", "c.tsv"]);
    ok(dir, &["preprocess", "--input", "c.tsv", "--min-count", "50", "--out", "d.json"]);
    ok(dir, &["train-embeddings", "--input", "d.json", "--dim", "8", "--epochs", "1", "--out", "e.txt"]);
    ok(dir, &[
        "train", "--data", "d.json", "--embeddings", "e.txt", "--hidden", "4", "--lr", "0.01", "--epochs", "2",
        "--out", "m.json",
    ]);
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn end_to_end_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        pipeline(d);
        let report = ok(d, &["evaluate", "--ckpt", "m.json", "--keywords", "c.keywords.tsv", "--data", "d.json"]);
        std::fs::write(d.join("r.csv"), report.stdout).unwrap();
        ok(d, &["keyframes", "--input", "d.json", "--out", "k.json"]);
        ok(d, &["predict", "--ckpt", "m.json", "--data", "d.json", "--out", "p.jsonl"]);
    }
    for f in ["c.tsv", "d.json", "e.txt", "e.txt.meta.json", "m.json", "r.csv", "k.json", "p.jsonl"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }
    let csv = String::from_utf8(read(a.path(), "r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("method,category,precision,recall,f1"));
    assert!(lines.iter().any(|l| l.starts_with("SBN-IVA,all,")));
    assert!(lines.iter().any(|l| l.starts_with("KM,all,")));

    let preds = String::from_utf8(read(a.path(), "p.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    let p = first["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(preds.lines().count(), 20 * 200);
}

#[test]
fn stage_outputs_chain_and_reject_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    pipeline(d);

    let dump = ok(d, &["dump-attention", "--ckpt", "m.json", "--data", "d.json", "--video", "v003", "--index", "20"]);
    let v: serde_json::Value = serde_json::from_slice(&dump.stdout).unwrap();
    assert_eq!(v["kind"], "attention");
    assert_eq!(v["payload"]["neighbors"].as_array().unwrap().len(), 5);

    let json = ok(d, &["km", "--keywords", "c.keywords.tsv", "--data", "d.json", "--report", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["payload"][0]["method"], "KM");

    // A checkpoint passed as data.
    assert_eq!(run(d, &["predict", "--ckpt", "m.json", "--data", "m.json"]).status.code(), Some(2));

    // Embeddings from another corpus.
    ok(d, &["synth", "--videos", "20", "--comments", "200", "--seed", "6", "--out", "c2.tsv"]);
    ok(d, &["preprocess", "--input", "c2.tsv", "--min-count", "50", "--out", "d2.json"]);
    let args = ["train", "--data", "d2.json", "--embeddings", "e.txt", "--epochs", "1", "--hidden", "2", "--out", "m2.json"];
    let out = run(d, &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));
    let mut allowed = args.to_vec();
    allowed.push("--allow-mismatch");
    ok(d, &allowed);

    // Held-out split of another corpus.
    assert_eq!(run(d, &["evaluate", "--ckpt", "m.json", "--data", "d2.json"]).status.code(), Some(2));
    ok(d, &["evaluate", "--ckpt", "m.json", "--data", "d2.json", "--split", "all"]);

    // A missing checkpoint becomes an error row; the others still run.
    let out = ok(d, &["evaluate", "--ckpt", "gone=nope.json", "--ckpt", "m.json", "--data", "d.json"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("gone,all,,,,,,,,")));
    assert!(csv.lines().any(|l| l.starts_with("SBN-IVA,all,0")));
}

#[test]
fn bad_invocations_exit_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("d.json"), "{}").unwrap();
    assert_eq!(run(d, &["predict", "--data", "d.json"]).status.code(), Some(2));
    assert_eq!(run(d, &["preprocess", "--input", "absent.tsv", "--out", "x.json"]).status.code(), Some(2));
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(2));

    std::fs::write(d.join("bad.toml"), "[train]\nepochs = 3\nbogus = 1\n").unwrap();
    let out = run(d, &["--config", "bad.toml", "synth", "--out", "c.tsv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("c.tsv").exists());

    std::fs::write(d.join("zero.toml"), "[train]\nbatch_size = 0\n").unwrap();
    assert_eq!(run(d, &["--config", "zero.toml", "synth", "--out", "c.tsv"]).status.code(), Some(2));
    assert_eq!(run(d, &["synth", "--noise", "2", "--out", "c.tsv"]).status.code(), Some(2));
}

#[test]
fn config_file_supplies_paths_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--videos", "3", "--comments", "120", "--seed", "2", "--out", "c.tsv"]);
    std::fs::write(
        d.join("p.toml"),
        "[paths]\ncorpus = \"c.tsv\"\ndata = \"d.json\"\n[filter]\nmin_count = 1000\n",
    )
    .unwrap();
    ok(d, &["--config", "p.toml", "preprocess"]);
    let v: serde_json::Value = serde_json::from_slice(&read(d, "d.json")).unwrap();
    assert_eq!(v["payload"].as_array().unwrap().len(), 0);
    assert_eq!(v["config"]["filter"]["min_count"], 1000);
    ok(d, &["--config", "p.toml", "preprocess", "--min-count", "10"]);
    let v: serde_json::Value = serde_json::from_slice(&read(d, "d.json")).unwrap();
    assert_eq!(v["payload"].as_array().unwrap().len(), 3);
    assert_eq!(v["inputs"]["corpus"].as_str().unwrap().len(), 64);
}
