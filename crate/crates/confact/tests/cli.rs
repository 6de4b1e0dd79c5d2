//! End-to-end coverage of the `confact` subcommands.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{spawn_mock_server, MockResponse};
use confact::chunking::PassageRecord;
use confact::corpus::{load_dataset, Stance};

fn testdata(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

fn confact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confact"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn validate_accepts_the_bundled_fixture() {
    let output = confact(&["validate", testdata("fixture_10.jsonl").to_str().unwrap()]);
    assert!(output.status.success());
    assert!(stdout(&output).contains("dataset valid"));
}

#[test]
fn validate_reports_violations_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let mut records = load_dataset(testdata("fixture_2.jsonl")).unwrap();
    records[0].documents[0].human_credibility = Some(7);
    confact::corpus::write_dataset(&path, &records).unwrap();
    let output = confact(&["validate", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout(&output).contains("human_credibility"));
}

#[test]
fn stats_prints_split_counts() {
    let output = confact(&[
        "stats",
        testdata("fixture_10.jsonl").to_str().unwrap(),
        "--split",
        "modc",
    ]);
    assert!(output.status.success());
    let stats: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(stats["n_claims"], 6);
    assert_eq!(stats["n_sources"], 7);
}

#[test]
fn unknown_split_is_a_usage_error() {
    let output = confact(&[
        "stats",
        testdata("fixture_10.jsonl").to_str().unwrap(),
        "--split",
        "weird",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn chunk_emits_passage_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("passages.jsonl");
    let output = confact(&[
        "chunk",
        testdata("fixture_2.jsonl").to_str().unwrap(),
        "--granularity",
        "para",
        "--max-words",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let records: Vec<PassageRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!records.is_empty());
    for record in &records {
        assert!(record.passage.word_count <= 64);
        assert!(!record.question.is_empty());
    }

    let sentences = confact(&[
        "chunk",
        testdata("fixture_2.jsonl").to_str().unwrap(),
        "--granularity",
        "sent",
    ]);
    assert!(sentences.status.success());
    assert!(stdout(&sentences).lines().count() > records.len());
}

#[test]
fn rank_orders_by_fused_score_and_carries_credibility() {
    let dir = tempfile::tempdir().unwrap();
    let passages = dir.path().join("passages.jsonl");
    assert!(confact(&[
        "chunk",
        testdata("fixture_2.jsonl").to_str().unwrap(),
        "--out",
        passages.to_str().unwrap(),
    ])
    .status
    .success());

    let ranked = confact(&[
        "rank",
        passages.to_str().unwrap(),
        "--mode",
        "cw-soft",
        "--table",
        testdata("mbfc_fixture.tsv").to_str().unwrap(),
    ]);
    assert!(ranked.status.success());
    let mut last: Option<(String, usize, f64)> = None;
    let mut saw_cred = false;
    for line in stdout(&ranked).lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        let claim = row["claim_id"].as_str().unwrap().to_string();
        let rank = row["rank"].as_u64().unwrap() as usize;
        let fused = row["s_fused"].as_f64().unwrap();
        saw_cred |= row["s_cred"].as_f64().is_some();
        if let Some((prev_claim, prev_rank, prev_fused)) = &last {
            if *prev_claim == claim {
                assert_eq!(rank, prev_rank + 1);
                assert!(fused <= *prev_fused + 1e-12);
            }
        }
        last = Some((claim, rank, fused));
    }
    assert!(saw_cred, "curated sources must carry credibility scores");

    // Credibility-aware modes without a table are a config error.
    let missing_table = confact(&["rank", passages.to_str().unwrap(), "--mode", "cw-soft"]);
    assert_eq!(missing_table.status.code(), Some(2));
}

#[test]
fn background_lookup_hits_and_misses() {
    let hit = confact(&[
        "background",
        "https://www.bbc.co.uk/news/1",
        "--table",
        testdata("mbfc_fixture.tsv").to_str().unwrap(),
    ]);
    assert!(hit.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&hit)).unwrap();
    assert_eq!(value["provenance"], "curated");
    assert_eq!(value["source_domain"], "bbc.co.uk");
    assert_eq!(value["level"], "high");

    let miss = confact(&[
        "background",
        "unknown.example",
        "--table",
        testdata("mbfc_fixture.tsv").to_str().unwrap(),
    ]);
    assert!(miss.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&miss)).unwrap();
    assert_eq!(value["provenance"], "missing");
}

#[test]
fn annotate_writes_stances_and_conflicts_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data.jsonl");
    std::fs::copy(testdata("fixture_2.jsonl"), &dataset).unwrap();
    let (url, _) = spawn_mock_server(vec![MockResponse::completion("Support")]);

    let output = confact(&[
        "annotate",
        dataset.to_str().unwrap(),
        "--backend",
        &url,
        "--model",
        "mock-model",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let records = load_dataset(&dataset).unwrap();
    for record in &records {
        for doc in &record.documents {
            assert_eq!(doc.model_stance, Some(Stance::Support));
        }
    }
    let sidecar = dir.path().join("data.jsonl.annotations.jsonl");
    assert!(sidecar.exists());
    assert_eq!(std::fs::read_to_string(sidecar).unwrap().lines().count(), 4);

    // Every document now supports, so no claim is conflicting.
    let conflicts = confact(&["conflicts", dataset.to_str().unwrap()]);
    assert!(conflicts.status.success());
    assert_eq!(stdout(&conflicts).trim(), "");

    // The bundled fixture has conflicting stances on every claim.
    let conflicts = confact(&["conflicts", testdata("fixture_10.jsonl").to_str().unwrap()]);
    assert_eq!(stdout(&conflicts).lines().count(), 10);
}

#[test]
fn run_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let replay = format!("replay:{}", testdata("replay_e2e.jsonl").display());
    let run = confact(&[
        "run",
        testdata("fixture_2.jsonl").to_str().unwrap(),
        "--strategy",
        "dira",
        "--provider",
        "gt",
        "--mode",
        "cw-soft",
        "--table",
        testdata("mbfc_fixture.tsv").to_str().unwrap(),
        "--backend",
        &replay,
        "--model",
        "fixture-model",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let verdicts = out.join("modc_dira_cw-soft").join("verdicts.jsonl");
    assert!(verdicts.exists());

    let report = dir.path().join("eval-report.md");
    let eval = confact(&[
        "eval",
        verdicts.to_str().unwrap(),
        testdata("fixture_2.jsonl").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--provider",
        "gt",
        "--mode",
        "cw-soft",
    ]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let rendered = std::fs::read_to_string(&report).unwrap();
    assert!(rendered.contains("| modc | dira | gt | cw-soft | 2 |"));

    // Re-rendering the run's cards file reproduces the run's report bytes.
    let rerender = confact(&["report", out.join("cards.jsonl").to_str().unwrap()]);
    assert!(rerender.status.success());
    assert_eq!(stdout(&rerender), std::fs::read_to_string(out.join("report.md")).unwrap());
}

#[test]
fn config_errors_exit_with_code_two() {
    let missing = confact(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(missing.status.code(), Some(2));

    // provider none + SBA strategy is rejected before any work.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        format!(
            r#"
dataset = "{}"
splits = ["modc"]
strategies = ["sba-dir"]
provider = "none"
output_dir = "out"

[backend]
kind = "replay"
path = "{}"
"#,
            testdata("fixture_2.jsonl").display(),
            testdata("replay_e2e.jsonl").display()
        ),
    )
    .unwrap();
    let invalid = confact(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("sba-dir"));
}
