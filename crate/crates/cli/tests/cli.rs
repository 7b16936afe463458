use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_factgauge");

fn toy_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/toy_corpus.jsonl")
}

fn write_config(dir: &Path, corpus: &Path) -> PathBuf {
    let path = dir.join("factgauge.toml");
    fs::write(
        &path,
        format!(
            "corpus = {:?}\noutput_dir = \"out\"\nseed = 5\nruns = 2\n",
            corpus.to_str().unwrap()
        ),
    )
    .unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

#[test]
fn all_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &toy_corpus());
    let out = run(&["all", "--workers", "3"], &cfg);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("out");
    for f in [
        "stats.json",
        "stats.md",
        "diagnostic.jsonl",
        "diagnostic_stats.json",
        "diagnostic_stats.md",
        "scores.jsonl",
        "meta.json",
        "report.csv",
        "report.md",
        "report.jsonl",
        "distributions.jsonl",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let report = fs::read_to_string(dir.join("report.jsonl")).unwrap();
    let provenance: serde_json::Value =
        serde_json::from_str(report.lines().next().unwrap()).unwrap();
    assert_eq!(provenance["seed"], 5);
    assert_eq!(provenance["runs"], 2);
}

#[test]
fn perturb_is_reproducible_and_seed_overridable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &toy_corpus());
    let file = tmp.path().join("out/diagnostic.jsonl");
    assert!(run(&["perturb"], &cfg).status.success());
    let first = fs::read(&file).unwrap();
    assert!(run(&["perturb", "--workers", "4"], &cfg).status.success());
    assert_eq!(fs::read(&file).unwrap(), first);
    assert!(run(&["perturb", "--seed", "6"], &cfg).status.success());
    assert_ne!(fs::read(&file).unwrap(), first);
}

#[test]
fn missing_corpus_exits_with_config_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tmp.path().join("absent.jsonl"));
    let out = run(&["all"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_config_exits_with_config_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["stats"], &tmp.path().join("nope.toml"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_without_inputs_exits_with_stage_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &toy_corpus());
    assert_eq!(run(&["meta"], &cfg).status.code(), Some(1));
}

#[test]
fn per_summary_mode_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &toy_corpus());
    let out = run(
        &[
            "all",
            "--correlation-mode",
            "per-summary",
            "--include-level-zero",
        ],
        &cfg,
    );
    assert!(out.status.success());
    let report = fs::read_to_string(tmp.path().join("out/report.jsonl")).unwrap();
    let provenance: serde_json::Value =
        serde_json::from_str(report.lines().next().unwrap()).unwrap();
    assert_eq!(provenance["correlation_mode"], "per-summary");
    assert_eq!(provenance["include_level_zero"], true);
}
