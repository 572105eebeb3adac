//! Smoke tests for the command-line verbs.

use std::path::Path;
use std::process::{Command, Output};

use colocate::sim::standard_catalog;
use colocate::workload::{write_traces, TraceRecord};

fn colocate(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colocate"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
name = "smoke"
schedulers = ["hugo_star", "round_robin"]
seeds = [1, 2]
k = 3
output_dir = "out"
matrix_out = "state/matrix.json"
grouping_out = "state/grouping.json"

[workload]
mode = "repeat"
pattern = "A B E"
times = 1
"#;

#[test]
fn group_prints_a_label_per_job() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<TraceRecord> = standard_catalog()
        .profiles()
        .into_iter()
        .enumerate()
        .flat_map(|(i, (kind, usage))| {
            (0..3).map(move |t| TraceRecord {
                job_id: kind.clone(),
                node_id: format!("n{i}"),
                timestamp: t as f64 * 5.0,
                usage,
            })
        })
        .collect();
    let mut buf = Vec::new();
    write_traces(&mut buf, &records).unwrap();
    std::fs::write(dir.path().join("traces.csv"), buf).unwrap();

    let out = colocate(&["group", "--traces", "traces.csv", "--k", "6", "--out", "model.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 9);
    assert!(dir.path().join("model.json").exists());
}

#[test]
fn run_chain_and_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("smoke.toml"), CONFIG).unwrap();
    let more = CONFIG.replace("name = \"smoke\"", "name = \"next\"").replace("output_dir = \"out\"", "output_dir = \"next\"");
    std::fs::write(dir.path().join("next.toml"), more).unwrap();

    let out = colocate(&["run", "--config", "smoke.toml", "--validate"], dir.path());
    assert!(out.status.success());

    let out = colocate(&["run", "--config", "smoke.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("hugo_star"));
    for f in ["report.json", "utilization.csv", "waiting_histogram.csv", "decisions/hugo_star-seed1.jsonl"] {
        assert!(dir.path().join("out").join(f).exists(), "missing {f}");
    }
    assert!(dir.path().join("state/matrix.json").exists());

    let out = colocate(
        &["report", "--log", "out/decisions/hugo_star-seed1.jsonl", "--waiting-limit", "20"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("waiting_rounds,count"));

    let out = colocate(&["report", "--table", "out/report.json"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("round_robin"));

    let out = colocate(&["chain", "--configs", "smoke.toml", "next.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("next"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), CONFIG.replace("k = 3", "k = 0")).unwrap();
    let out = colocate(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = colocate(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
