//! Exercises the binary the way a user would: real process, real files.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cghf"))
}

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let status = bin()
            .args(["run", "--scenario"])
            .arg(repo_path("scenarios/multi_access.json"))
            .args(["--seed", "99", "--out"])
            .arg(dir.path().join(sub))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(dir.path().join("a/events.ndjson")).unwrap();
    let b = std::fs::read(dir.path().join("b/events.ndjson")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn replay_agrees_with_the_run_it_reads() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--scenario"])
        .arg(repo_path("scenarios/anchor.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());

    let output = bin()
        .args(["replay", "--log"])
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("metrics match"), "{stderr}");

    let metrics = bin()
        .args(["metrics", "--log"])
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&metrics.stdout).expect("metrics prints json");
    assert_eq!(report["scenario"], "anchor");
}

#[test]
fn lint_accepts_shipped_rules_and_rejects_invalid_ones() {
    for file in ["congestion", "anchor", "service_point", "multi_access"] {
        let status = bin()
            .args(["lint", "--rules"])
            .arg(repo_path(&format!("rules/{file}.rules")))
            .arg("--model")
            .arg(repo_path("rules/model.rules"))
            .status()
            .unwrap();
        assert!(status.success(), "{file} should lint clean");
    }

    let output = bin()
        .args(["lint", "--rules"])
        .arg(repo_path("rules/invalid/static_write.rules"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("static_write.rules:"), "{stderr}");
}
