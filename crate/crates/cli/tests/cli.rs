// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paramdoc"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn golden(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["stats", "--corpus", "x", "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&[]).status.code(), Some(2));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("abstract"));
}

#[test]
fn io_failures_name_the_path() {
    let o = run(&["stats", "--corpus", "/definitely/missing.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/definitely/missing.jsonl"));
}

#[test]
fn stats_on_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = run(&["stats", "--corpus", p(&empty)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty corpus"));
}

#[test]
fn stats_reports_dedup_counts() {
    let corpus = repo("data/sms_corpus.jsonl");
    let o = run(&["--format", "json", "stats", "--corpus", p(&corpus)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["total_parameter_occurrences"], 17);
    assert_eq!(v["unique_parameter_names"], 11);
}

#[test]
fn recommend_prints_signature_name() {
    let corpus = repo("data/sms_corpus.jsonl");
    let o = run(&[
        "recommend",
        "--corpus",
        p(&corpus),
        "--api",
        "AddSmsSign",
        "--param",
        "SignName",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert!(
        first.contains("\"Signature Name\"")
            && first.contains("Aliyun")
            && first.contains("sms.SendSms")
    );

    let unknown = run(&[
        "recommend",
        "--corpus",
        p(&corpus),
        "--api",
        "Nope",
        "--param",
        "SignName",
    ]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn ingest_index_recommend_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(repo("data/sms_corpus.jsonl")).unwrap();
    let specs: Vec<&str> = text.lines().collect();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    fs::write(&a, specs[0]).unwrap();
    fs::write(&b, specs[1]).unwrap();
    let corpus = dir.path().join("out/corpus.jsonl");
    let o = run(&["ingest", p(&b), p(&a), "--out", p(&corpus)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&corpus).unwrap(), text);

    let dup = run(&[
        "ingest",
        p(&a),
        p(&a),
        "--out",
        p(&dir.path().join("dup.jsonl")),
    ]);
    assert_eq!(dup.status.code(), Some(1));

    let cache = dir.path().join("index.json");
    assert!(run(&["index", "--corpus", p(&corpus), "--out", p(&cache)])
        .status
        .success());
    let with_cache = run(&[
        "recommend",
        "--corpus",
        p(&corpus),
        "--index",
        p(&cache),
        "--api",
        "AddSmsSign",
        "--param",
        "SignName",
    ]);
    let without = run(&[
        "recommend",
        "--corpus",
        p(&corpus),
        "--api",
        "AddSmsSign",
        "--param",
        "SignName",
    ]);
    assert_eq!(with_cache.stdout, without.stdout);

    // A cache built from another corpus is refused.
    let other = dir.path().join("other.jsonl");
    fs::write(&other, format!("{}\n", specs[1])).unwrap();
    let stale = run(&[
        "recommend",
        "--corpus",
        p(&other),
        "--index",
        p(&cache),
        "--api",
        "SendSms",
        "--param",
        "SignName",
    ]);
    assert_eq!(stale.status.code(), Some(1));
    assert!(stderr(&stale).contains("index.json"));
}

#[test]
fn abstract_matches_golden_at_any_shard_count() {
    let want = fs::read(golden("template_code.json")).unwrap();
    let log = golden("template_code.log");
    for shards in ["1", "3", "16"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[
            "abstract",
            "--log",
            p(&log),
            "--out",
            p(dir.path()),
            "--shards",
            shards,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(
            fs::read(dir.path().join("TemplateCode.json")).unwrap(),
            want,
            "shards {shards}"
        );
    }
}

#[test]
fn abstract_api_scope_writes_nested_files() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("mixed.log");
    fs::write(
        &log,
        "SendSms\tSignName\tAliyun\nAddSmsSign\tSignName\t阿里云\n",
    )
    .unwrap();
    let out = dir.path().join("profiles");
    let o = run(&[
        "abstract",
        "--log",
        p(&log),
        "--out",
        p(&out),
        "--scope",
        "api-param",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let add = fs::read_to_string(out.join("AddSmsSign/SignName.json")).unwrap();
    assert!(add.contains("\"parameter_pattern\": \"z\""));
    assert!(out.join("SendSms/SignName.json").exists());

    let bad = dir.path().join("bad.log");
    fs::write(&bad, "no tabs here\n").unwrap();
    let o = run(&["abstract", "--log", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.log"));
    let o = run(&[
        "abstract",
        "--log",
        p(&log),
        "--out",
        p(&out),
        "--shards",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_and_generate_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    fs::write(
        &pairs,
        "SendSms\tSignName\tSignature Name\nSendSms\tPhoneNumbers\tPhone Numbers\n",
    )
    .unwrap();
    let train = |seed: &str, out: &Path| {
        let o = run(&[
            "--seed",
            seed,
            "train",
            "--pairs",
            p(&pairs),
            "--out",
            p(out),
            "--epochs",
            "5",
            "--hidden-dim",
            "8",
            "--input-dim",
            "4",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let a = train("3", &dir.path().join("a.json"));
    let b = train("3", &dir.path().join("b.json"));
    let c = train("4", &dir.path().join("c.json"));
    assert_eq!(a, b);
    assert_ne!(a, c);

    let g = |m: &str| {
        run(&[
            "generate", "--model", m, "--api", "SendSms", "--param", "SignName",
        ])
    };
    let ga = g(p(&dir.path().join("a.json")));
    assert!(ga.status.success());
    assert_eq!(ga.stdout, g(p(&dir.path().join("b.json"))).stdout);

    let corrupt = dir.path().join("corrupt.json");
    fs::write(&corrupt, "{}").unwrap();
    assert_eq!(g(p(&corrupt)).status.code(), Some(1));
}

#[test]
fn metrics_over_event_file() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let line = |id: &str, chosen: &str, ts: &str| {
        format!(
            "{{\"event_id\":\"{id}\",\"api_id\":\"sms.AddSmsSign\",\"param_name\":\"SignName\",\"field\":\"description\",\"shown\":[\"search:aa\",\"translation:bb\"],\"chosen\":{chosen},\"timestamp\":\"{ts}\"}}\n"
        )
    };
    let body = [
        line("1", "\"search:aa\"", "2026-03-02T10:00:00Z"),
        line("2", "\"search:aa\"", "2026-03-03T10:00:00Z"),
        line("3", "null", "2026-03-04T10:00:00Z"),
        line("4", "\"translation:bb\"", "2026-03-17T10:00:00Z"),
    ]
    .concat();
    fs::write(&log, body).unwrap();
    let o = run(&[
        "--format",
        "json",
        "metrics",
        "--events",
        p(&log),
        "--bucket",
        "weekly",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rate"], 0.75);
    assert_eq!(v["buckets"].as_array().unwrap().len(), 3);
    assert!(v["buckets"][1]["rate"].is_null());
    assert_eq!(v["by_kind"]["translation"]["valid"], 1);

    let o = run(&["metrics", "--events", p(&log), "--from", "2026-04-01"]);
    assert!(stdout(&o).contains("rate: undefined"));
    let o = run(&[
        "metrics",
        "--events",
        p(&log),
        "--from",
        "2026-04-01",
        "--to",
        "2026-03-01",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn serve_requires_artifacts() {
    let o = run(&["serve"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--corpus"));
    let o = run(&["serve", "--config", "/missing/serve.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/missing/serve.toml"));
}
