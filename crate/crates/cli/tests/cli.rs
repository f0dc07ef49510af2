use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use rpo_core::corpus::io::{parse_jsonl, read_jsonl};
use rpo_core::corpus::{KtoRecord, PairRecord};
use rpo_core::metrics::SessionRecord;
use rpo_core::policy::ToyPolicy;

fn rpo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rpo(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn sha(p: &Path) -> String {
    format!("{:x}", Sha256::digest(fs::read(p).unwrap()))
}

/// Writes a generator config and runs `gen` into `dir/gen`.
fn gen(dir: &Path, config: Value) -> PathBuf {
    let cfg = dir.join("gen.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let out = dir.join("gen");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out)]);
    out
}

fn small(seed: u64, p: f64) -> Value {
    json!({ "num_sessions": 12, "turns_per_session": 3, "seed": seed, "adherence": { "kind": "bernoulli", "p": p } })
}

fn curve(p: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn exit_codes_distinguish_usage_from_data_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let out = rpo(&["gen", "--config", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = rpo(&["pairs", "--sessions", s(&empty), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let broken = dir.path().join("broken.jsonl");
    fs::write(&broken, "{\"session_id\": 3\n").unwrap();
    let out = rpo(&["eval", "--sessions", s(&broken), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    let bad_cfg = dir.path().join("bad.json");
    fs::write(
        &bad_cfg,
        json!({ "num_sessions": 0, "turns_per_session": 3, "seed": 1 }).to_string(),
    )
    .unwrap();
    let out = rpo(&["gen", "--config", s(&bad_cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_writes_sessions_profiles_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = gen(dir.path(), small(3, 0.7));
    let sessions: Vec<SessionRecord> = read_jsonl(&out.join("sessions.jsonl")).unwrap();
    assert_eq!(sessions.len(), 12);
    assert!(out.join("profiles.json").exists());
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "gen");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["summary"]["sessions"], 12);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let digests = |tag: &str| {
        let root = dir.path().join(tag);
        fs::create_dir_all(&root).unwrap();
        let g = gen(&root, small(5, 0.7));
        let sessions = g.join("sessions.jsonl");
        let p = root.join("pairs");
        ok(&["pairs", "--sessions", s(&sessions), "--out", s(&p)]);
        let t = root.join("train");
        ok(&[
            "train",
            "--pairs",
            s(&p.join("pairs.jsonl")),
            "--steps",
            "200",
            "--seed",
            "4",
            "--out",
            s(&t),
        ]);
        [
            sessions,
            g.join("profiles.json"),
            p.join("pairs.jsonl"),
            t.join("policy.json"),
            t.join("curve.csv"),
        ]
        .map(|f| sha(&f))
    };
    assert_eq!(digests("a"), digests("b"));
}

#[test]
fn rpo_emits_two_pairs_per_differing_comparison() {
    let dir = TempDir::new().unwrap();
    let g = gen(dir.path(), small(6, 0.6));
    let sessions: Vec<SessionRecord> = read_jsonl(&g.join("sessions.jsonl")).unwrap();
    let mut expected = 0;
    for t in sessions.iter().flat_map(|s| &s.turns) {
        for (i, a) in t.samples.iter().enumerate() {
            expected += t.samples[i + 1..]
                .iter()
                .filter(|b| b.adherence.bits != a.adherence.bits)
                .count()
                * 2;
        }
    }
    let p = dir.path().join("pairs");
    ok(&["pairs", "--sessions", s(&g.join("sessions.jsonl")), "--out", s(&p)]);
    let pairs: Vec<PairRecord> = read_jsonl(&p.join("pairs.jsonl")).unwrap();
    assert_eq!(pairs.len(), expected);
    assert_eq!(read_json(&p.join("manifest.json"))["summary"]["pairs"], expected);
}

#[test]
fn dpo_skips_and_reports_all_tie_turns() {
    let dir = TempDir::new().unwrap();
    let g = gen(
        dir.path(),
        json!({ "num_sessions": 2, "turns_per_session": 1, "seed": 1, "adherence": { "kind": "bernoulli", "p": 1.0 } }),
    );
    let p = dir.path().join("pairs");
    let out = ok(&[
        "pairs",
        "--sessions",
        s(&g.join("sessions.jsonl")),
        "--method",
        "dpo",
        "--out",
        s(&p),
    ]);
    let pairs: Vec<PairRecord> = read_jsonl(&p.join("pairs.jsonl")).unwrap();
    assert!(pairs.is_empty());
    assert_eq!(read_json(&p.join("manifest.json"))["summary"]["tied_turns"], 2);
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("tie"));
}

#[test]
fn kto_examples_hold_under_rechecking() {
    let dir = TempDir::new().unwrap();
    let g = gen(dir.path(), small(7, 0.6));
    let p = dir.path().join("kto");
    ok(&[
        "pairs",
        "--sessions",
        s(&g.join("sessions.jsonl")),
        "--method",
        "kto",
        "--out",
        s(&p),
    ]);
    let records: Vec<KtoRecord> = read_jsonl(&p.join("kto.jsonl")).unwrap();
    assert!(!records.is_empty());
    for r in &records {
        let e = r.to_example().unwrap();
        for c in &e.instruction {
            assert_eq!(c.check(&e.response.text), e.label);
        }
    }
}

fn pairs_file(dir: &Path, seed: u64) -> PathBuf {
    let g = gen(dir, small(seed, 0.7));
    let p = dir.join("pairs");
    ok(&["pairs", "--sessions", s(&g.join("sessions.jsonl")), "--out", s(&p)]);
    p.join("pairs.jsonl")
}

#[test]
fn train_records_default_hyperparameters() {
    let dir = TempDir::new().unwrap();
    let pairs = pairs_file(dir.path(), 8);
    let t = dir.path().join("train");
    ok(&[
        "train",
        "--pairs",
        s(&pairs),
        "--steps",
        "20",
        "--grad-check",
        "--out",
        s(&t),
    ]);
    let m = read_json(&t.join("manifest.json"));
    let text = m["config"].to_string();
    assert!(text.contains("\"beta\":0.1"), "{text}");
    assert!(text.contains("\"gamma\":0.05"), "{text}");
    assert!(m["summary"]["grad_check_max_rel_error"].as_f64().unwrap() < 1e-5);
    assert_eq!(curve(&t.join("curve.csv")).len(), 20);
}

#[test]
fn zero_gamma_rpo_matches_dpo_curve() {
    let dir = TempDir::new().unwrap();
    let pairs = pairs_file(dir.path(), 9);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "train",
        "--pairs",
        s(&pairs),
        "--steps",
        "100",
        "--loss",
        "rpo",
        "--gamma",
        "0",
        "--out",
        s(&a),
    ]);
    ok(&[
        "train",
        "--pairs",
        s(&pairs),
        "--steps",
        "100",
        "--loss",
        "dpo",
        "--out",
        s(&b),
    ]);
    let (ca, cb) = (curve(&a.join("curve.csv")), curve(&b.join("curve.csv")));
    assert_eq!(ca.len(), cb.len());
    for (x, y) in ca.iter().zip(&cb) {
        assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
    }
}

#[test]
fn zero_steps_keep_the_initial_policy() {
    let dir = TempDir::new().unwrap();
    let pairs = pairs_file(dir.path(), 10);
    let t = dir.path().join("train");
    ok(&["train", "--pairs", s(&pairs), "--steps", "0", "--out", s(&t)]);
    let saved: ToyPolicy = serde_json::from_str(&fs::read_to_string(t.join("policy.json")).unwrap()).unwrap();
    let records: Vec<PairRecord> = read_jsonl(&pairs).unwrap();
    let pairs: Vec<_> = records.iter().map(|r| r.to_pair().unwrap()).collect();
    assert_eq!(saved, ToyPolicy::from_pairs(&pairs).unwrap());
}

#[test]
fn sft_init_requires_sessions() {
    let dir = TempDir::new().unwrap();
    let pairs = pairs_file(dir.path(), 11);
    let out = rpo(&[
        "train",
        "--pairs",
        s(&pairs),
        "--init",
        "sft",
        "--out",
        s(&dir.path().join("t")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let sessions = dir.path().join("gen/sessions.jsonl");
    ok(&[
        "train",
        "--pairs",
        s(&pairs),
        "--init",
        "sft",
        "--sessions",
        s(&sessions),
        "--steps",
        "10",
        "--out",
        s(&dir.path().join("t")),
    ]);
}

#[test]
fn perfect_corpus_scores_one_everywhere() {
    let dir = TempDir::new().unwrap();
    let g = gen(dir.path(), small(12, 1.0));
    let e = dir.path().join("eval");
    for judge in ["rules", "stub"] {
        ok(&[
            "eval",
            "--sessions",
            s(&g.join("sessions.jsonl")),
            "--judge",
            judge,
            "--out",
            s(&e),
        ]);
        let r = read_json(&e.join("report.json"));
        assert_eq!(
            (r["csr"].as_f64(), r["isr"].as_f64(), r["ssr"].as_f64()),
            (Some(1.0), Some(1.0), Some(1.0))
        );
    }
}

#[test]
fn eval_matches_golden_report() {
    let dir = TempDir::new().unwrap();
    let e = dir.path().join("eval");
    ok(&["eval", "--sessions", s(&fixture("sessions.jsonl")), "--out", s(&e)]);
    assert_eq!(
        read_json(&e.join("report.json")),
        read_json(&fixture("golden_report.json"))
    );
    let sessions: Vec<SessionRecord> = parse_jsonl(&fs::read_to_string(fixture("sessions.jsonl")).unwrap()).unwrap();
    assert_eq!(sessions.len(), 3);
}

#[test]
fn eval_with_trained_policy_reports_coverage() {
    let dir = TempDir::new().unwrap();
    let pairs = pairs_file(dir.path(), 13);
    let t = dir.path().join("train");
    ok(&["train", "--pairs", s(&pairs), "--steps", "300", "--out", s(&t)]);
    let e = dir.path().join("eval");
    let sessions = dir.path().join("gen/sessions.jsonl");
    ok(&[
        "eval",
        "--sessions",
        s(&sessions),
        "--policy",
        s(&t.join("policy.json")),
        "--out",
        s(&e),
    ]);
    let cov = &read_json(&e.join("manifest.json"))["summary"]["policy_coverage"];
    assert_eq!(cov["turns"], 36);
    assert!(cov["policy_rows"].as_u64().unwrap() > 0);
}

#[test]
fn http_judge_without_endpoint_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rpo"))
        .args([
            "eval",
            "--sessions",
            s(&fixture("sessions.jsonl")),
            "--judge",
            "http",
            "--out",
            s(dir.path()),
        ])
        .env_remove("RPO_JUDGE_URL")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_strategies() {
    let dir = TempDir::new().unwrap();
    let g = gen(dir.path(), small(14, 0.6));
    let a = dir.path().join("analyze");
    ok(&[
        "analyze",
        "--sessions",
        s(&g.join("sessions.jsonl")),
        "--strategy",
        "reverse",
        "--out",
        s(&a),
    ]);
    let body = read_json(&a.join("efficiency.json"));
    let eff = &body["efficiency"];
    let with_pairs: Vec<SessionRecord> = read_jsonl(&g.join("sessions.jsonl")).unwrap();
    let differing = with_pairs
        .iter()
        .flat_map(|s| &s.turns)
        .filter(|t| {
            t.samples
                .iter()
                .any(|r| r.adherence.bits != t.samples[0].adherence.bits)
        })
        .count() as f64;
    let share = differing / 36.0;
    for key in ["valid", "dominated", "perfect"] {
        assert_eq!(eff[key].as_f64().unwrap(), share);
    }
    let buckets: u64 = body["gap_buckets"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    let classes: u64 = body["pair_classes"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(buckets, classes);

    let one = gen(
        dir.path(),
        json!({ "num_sessions": 4, "turns_per_session": 2, "seed": 2, "samples_per_turn": 1 }),
    );
    ok(&[
        "analyze",
        "--sessions",
        s(&one.join("sessions.jsonl")),
        "--strategy",
        "direct",
        "--out",
        s(&a),
    ]);
    assert_eq!(read_json(&a.join("efficiency.json"))["efficiency"]["valid"], 0.0);
}

#[test]
fn stdout_is_silent_without_json_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("gen.json");
    fs::write(&cfg, small(15, 0.7).to_string()).unwrap();
    let out = ok(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("g"))]);
    assert!(out.stdout.is_empty());
    let out = ok(&["--json", "gen", "--config", s(&cfg), "--out", s(&dir.path().join("g"))]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["summary"]["sessions"], 12);
}
