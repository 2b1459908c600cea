use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_prompt-rerank"));
    for var in [
        "PNR_BASE_URL",
        "PNR_COMPLETE_URL",
        "PNR_SCORE_URL",
        "PNR_FILL_MASK_URL",
        "PNR_EMBED_URL",
        "PNR_CLASSIFIER_URL",
    ] {
        c.env_remove(var);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOY: &str = r#"{"id":"p1","source":"the food was good","reference":"the food was bad","source_style":"positive","target_style":"negative"}
{"id":"p2","source":"i love this place","reference":"i hate this place","source_style":"positive","target_style":"negative"}
{"id":"n1","source":"the staff was rude","reference":"the staff was friendly","source_style":"negative","target_style":"positive"}
"#;

#[test]
fn transfer_single_text_with_mocks() {
    let o = run(&["transfer", "--mock", "--text", "the food was good", "--from", "positive", "--to", "negative"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "the food was bad");
}

#[test]
fn transfer_json_has_candidates() {
    let o = run(&["--json", "transfer", "--mock", "--text", "great view", "--from", "positive", "--to", "negative"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["candidates"].as_array().unwrap().len(), 3);
    assert!(v["output"].is_string());
}

#[test]
fn usage_errors_exit_2() {
    let missing_to = run(&["transfer", "--mock", "--text", "x", "--from", "positive"]);
    assert_eq!(missing_to.status.code(), Some(2));
    let zero_k = run(&["transfer", "--mock", "--k", "0", "--text", "x", "--from", "a", "--to", "b"]);
    assert_eq!(zero_k.status.code(), Some(2));
    let bad_delim = run(&["transfer", "--mock", "--delimiter", "nope", "--text", "x", "--from", "a", "--to", "b"]);
    assert_eq!(bad_delim.status.code(), Some(2));
}

#[test]
fn unreachable_backend_exits_1() {
    let o = run(&[
        "transfer",
        "--base-url",
        "http://127.0.0.1:9",
        "--max-attempts",
        "1",
        "--timeout-secs",
        "2",
        "--text",
        "the food was good",
        "--from",
        "positive",
        "--to",
        "negative",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn symb_writes_requested_records() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("symb.jsonl");
    let o = run(&["symb", "--n", "1000", "--seed", "7", "--out", path(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1000);
    let again = run(&["symb", "--n", "1000", "--seed", "7"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn clean_rewrites_lines() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("raw.txt");
    fs::write(&input, "it was great !\ni do n't know , really\n").unwrap();
    let o = run(&["clean", "--in", path(&input)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "it was great!\ni don't know, really\n");
}

#[test]
fn eval_identical_files() {
    let dir = TempDir::new().unwrap();
    let hyp = dir.path().join("hyp.txt");
    fs::write(&hyp, "the cat sat on the mat\na dog ran\n").unwrap();
    let o = run(&["eval", "--hyp", path(&hyp), "--ref", path(&hyp), "--src", path(&hyp)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("r-sBLEU      100.0000"), "{text}");
    assert!(text.contains("exact match  1.0000"), "{text}");
}

#[test]
fn manifest_eval_reproduces_summary() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("toy.jsonl");
    let manifest = dir.path().join("run.jsonl");
    fs::write(&data, TOY).unwrap();
    let t = run(&["transfer", "--mock", "-i", path(&data), "--out", path(&manifest)]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    assert!(stdout(&t).contains("-- 3 examples, 0 failed"));

    let e = run(&["eval", "--manifest", path(&manifest)]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    assert!(stdout(&e).contains("stored summary reproduced"));

    let j = run(&["--json", "eval", "--manifest", path(&manifest)]);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["matches_stored"], true);
}

#[test]
fn sweep_is_full_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("toy.jsonl");
    fs::write(&data, TOY).unwrap();
    let csvs: Vec<String> = (0..2)
        .map(|_| {
            let o = run(&["sweep", "--mock", "-i", path(&data), "--seed", "3"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            stdout(&o)
        })
        .collect();
    assert_eq!(csvs[0].lines().count(), 81);
    assert!(csvs[0].starts_with("template,delimiter,direction,shots,"));
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn sweep_writes_manifests() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("toy.jsonl");
    let out = dir.path().join("table.csv");
    let mdir = dir.path().join("manifests");
    fs::write(&data, TOY).unwrap();
    let o = run(&[
        "sweep",
        "--mock",
        "-i",
        path(&data),
        "--templates",
        "vanilla,contrastive",
        "--delimiters",
        "curly",
        "--out",
        path(&out),
        "--manifest-dir",
        path(&mdir),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 5);
    assert_eq!(fs::read_dir(&mdir).unwrap().count(), 4);
}

#[test]
fn symb_transfer_with_flat_style_mocks() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("symb.jsonl");
    assert!(run(&["symb", "--n", "50", "--seed", "7", "--out", path(&data)]).status.success());
    let o = run(&[
        "transfer",
        "--mock",
        "--complete-url",
        "mock:symbolic",
        "--fill-mask-url",
        "mock:flat",
        "--classifier-url",
        "mock:flat",
        "-i",
        path(&data),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("-- 50 examples, 0 failed"), "{text}");
    assert!(text.contains("exact match  1.0000"), "{text}");
}
