use std::path::Path;
use std::process::{Command, Output};

use nfvsched::workload::read_batch;
use nfvsched::ScenarioConfig;

fn nfvsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfvsched"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nfvsched(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tiny_run(out: &Path) -> String {
    ok(&[
        "run",
        "--desk",
        "--out",
        out.to_str().unwrap(),
        "--episodes",
        "3",
        "--services",
        "12",
        "--hidden",
        "1x8",
        "--seed",
        "3",
        "--scheduler",
        "fifo",
        "--scheduler",
        "priority",
        "--scheduler",
        "ddpg",
    ])
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let table = tiny_run(dir.path());
    for name in ["fifo-seed3", "priority-seed3", "ddpg-seed3"] {
        assert!(
            dir.path().join(name).join("metrics.csv").is_file(),
            "{name}"
        );
    }
    assert!(!dir.path().join("wfq-seed3").exists());
    assert!(table.starts_with("scheduler"));
    let again = ok(&["summarize", dir.path().to_str().unwrap()]);
    assert_eq!(again.lines().count(), table.lines().count());
    for line in again.lines().skip(1) {
        assert!(table.contains(line), "{line}");
    }
}

#[test]
fn reruns_write_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    tiny_run(a.path());
    tiny_run(b.path());
    for name in ["fifo-seed3", "priority-seed3"] {
        let read = |d: &Path| std::fs::read(d.join(name).join("metrics.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{name}");
    }
}

#[test]
fn generate_writes_requested_batch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.jsonl");
    let p = path.to_str().unwrap();
    ok(&[
        "generate",
        "--seed",
        "5",
        "--count",
        "17",
        "--scenario",
        "12-8",
        "--out",
        p,
    ]);
    let batch = read_batch(&path).unwrap();
    assert_eq!(batch.len(), 17);
    assert!(batch
        .iter()
        .flat_map(|s| &s.vnfs)
        .all(|v| (1..=8).contains(&v.cpu_cores)));
    let first = std::fs::read(&path).unwrap();
    ok(&[
        "generate",
        "--seed",
        "5",
        "--count",
        "17",
        "--scenario",
        "12-8",
        "--out",
        p,
    ]);
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn config_output_round_trips() {
    let text = ok(&["config", "--desk"]);
    let cfg = ScenarioConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, ScenarioConfig::desk());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(
        &path,
        "episodes = 2\nservices_per_episode = 5\nschedulers = [\"wfq\"]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--hidden",
        "1x4",
    ]);
    assert!(out.join("wfq-seed1/metrics.csv").is_file());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--desk", "--out", out, "--scheduler", "lottery"],
        vec!["run", "--desk", "--out", out, "--scenario", "12-6"],
        vec!["run", "--desk", "--out", out, "--hidden", "wide"],
        vec!["run", "--desk", "--out", out, "--topology", "/no/such/file"],
        vec!["summarize", "/no/such/dir"],
    ] {
        let o = nfvsched(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
}
