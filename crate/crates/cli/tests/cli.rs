use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};

const SAMPLE15: &str = include_str!("../../core/tests/data/sample15.traj");

fn aptb(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_aptb")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run(args: &[&str]) -> i32 {
    aptb_cli::run(std::iter::once("aptb").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sample15(dir: &Path) -> PathBuf {
    let p = dir.join("sample15.traj");
    std::fs::write(&p, SAMPLE15).unwrap();
    p
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn publish_writes_dataset_ledger_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let out = dir.path().join("pub.traj");
    let code = run(&["publish", "--in", s(&input), "--out", s(&out), "--eps", "1.0", "--h", "3", "--theta", "2", "--seed", "7"]);
    assert_eq!(code, 0);

    let published = std::fs::read(&out).unwrap();
    let ledger = std::fs::read(dir.path().join("pub.traj.ledger.tsv")).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("pub.traj.manifest.json")).unwrap()).unwrap();
    assert!(aptb_core::Dataset::parse(std::str::from_utf8(&published).unwrap()).is_ok());
    assert_eq!(manifest["command"], "publish");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["inputs"][0]["sha256"], sha256_hex(SAMPLE15.as_bytes()));
    assert_eq!(manifest["outputs"][0]["sha256"], sha256_hex(&published));
    assert_eq!(manifest["outputs"][1]["sha256"], sha256_hex(&ledger));
    assert!(manifest["ledger"]["max_path_sum"].as_f64().unwrap() <= 1.0 + 1e-9);
    assert!(manifest["config"].as_array().unwrap().iter().any(|l| l == "theta = 2"));
}

#[test]
fn publish_baseline_mechanism() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let out = dir.path().join("base.traj");
    assert_eq!(run(&["publish", "--in", s(&input), "--out", s(&out), "--mechanism", "baseline", "--eps", "1", "--h", "3", "--seed", "1"]), 0);
    let manifest = std::fs::read_to_string(dir.path().join("base.traj.manifest.json")).unwrap();
    assert!(manifest.contains("\"mechanism\": \"baseline\""));
}

#[test]
fn invalid_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let out = dir.path().join("x.traj");
    let (code, _, err) = aptb(&["publish", "--in", s(&input), "--out", s(&out), "--eps", "0", "--h", "3", "--seed", "7"]);
    assert_eq!(code, 2);
    assert!(err.contains("epsilon") && err.contains("> 0"), "{err}");
    assert!(!out.exists());

    let (code, _, err) = aptb(&["publish", "--in", s(&input), "--out", s(&out), "--eps", "1", "--h", "3"]);
    assert_eq!(code, 2);
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "eps = 0.5\nh = 2\nseed = 3\ntheta = 2\n").unwrap();
    let out = dir.path().join("p.traj");
    assert_eq!(run(&["publish", "--in", s(&input), "--out", s(&out), "--config", s(&cfg), "--eps", "2"]), 0);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("p.traj.manifest.json")).unwrap()).unwrap();
    let lines: Vec<&str> = manifest["config"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(lines.contains(&"eps = 2") && lines.contains(&"h = 2") && lines.contains(&"seed = 3"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);

    std::fs::write(&cfg, "eps = 0.5\nbogus = 1\n").unwrap();
    assert_eq!(run(&["publish", "--in", s(&input), "--out", s(&out), "--config", s(&cfg), "--h", "2", "--seed", "1"]), 2);
}

#[test]
fn unreadable_or_malformed_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.traj");
    let missing = dir.path().join("missing.traj");
    assert_eq!(run(&["publish", "--in", s(&missing), "--out", s(&out), "--eps", "1", "--h", "2", "--seed", "1"]), 3);
    let bad = dir.path().join("bad.traj");
    std::fs::write(&bad, "universe rows=1 cols=2 slots=3\n0:1 0:0\n").unwrap();
    let (code, _, err) = aptb(&["publish", "--in", s(&bad), "--out", s(&out), "--eps", "1", "--h", "2", "--seed", "1"]);
    assert_eq!(code, 3);
    assert!(err.contains("line 2"), "{err}");
    assert!(!out.exists());
}

#[test]
fn audit_failure_withholds_publication() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let out = dir.path().join("x.traj");
    let (code, _, err) = aptb(&[
        "publish", "--in", s(&input), "--out", s(&out), "--eps", "1", "--h", "3", "--seed", "1", "--test-fault", "overcharge",
    ]);
    assert_eq!(code, 4);
    assert!(err.contains("audit"), "{err}");
    assert!(std::fs::read_dir(dir.path()).unwrap().count() == 1, "only the input may remain");
}

#[test]
fn eval_identical_files_have_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let report = dir.path().join("report.txt");
    let summary = dir.path().join("summary.tsv");
    assert_eq!(
        run(&["eval", "--in", s(&input), "--published", s(&input), "--seed", "1", "--out", s(&report), "--summary", s(&summary)]),
        0
    );
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("avg_relative_error = 0\n"), "{text}");
    assert!(text.contains("length_distribution_l1 = 0\n"), "{text}");
    let rows = std::fs::read_to_string(&summary).unwrap();
    assert!(rows.lines().all(|l| l.split('\t').count() == 5));
}

#[test]
fn eval_missing_published_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let gone = dir.path().join("gone.traj");
    let report = dir.path().join("r.txt");
    assert_eq!(run(&["eval", "--in", s(&input), "--published", s(&gone), "--seed", "1", "--out", s(&report)]), 3);
    assert!(!report.exists());
}

#[test]
fn eval_sweep_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample15(dir.path());
    let report = dir.path().join("r.txt");
    let summary = dir.path().join("s.tsv");
    let code = run(&[
        "eval", "--in", s(&input), "--mechanism", "aptb,baseline", "--sweep", "eps=0.5,1.0", "--seeds", "20", "--h", "3",
        "--seed", "5", "--out", s(&report), "--summary", s(&summary),
    ]);
    assert_eq!(code, 0);
    let rows = std::fs::read_to_string(&summary).unwrap();
    assert_eq!(rows.lines().count(), 2 * 2 * 20);
    for line in rows.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[0], "avg_relative_error");
        assert!(cols[1] == "aptb" || cols[1] == "baseline");
        assert!(cols[4].parse::<f64>().unwrap() >= 0.0);
    }
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("[sign-test eps=0.5]") && text.contains("[baseline eps=1]"));
    assert_eq!(run(&["eval", "--in", s(&input), "--sweep", "eps=0", "--h", "3", "--seed", "5", "--out", s(&report)]), 2);
}

#[test]
fn dpcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("dp.txt");
    let (code, stdout, _) = aptb(&["dpcheck", "--fixture", "mixed", "--eps", "1.0", "--trials", "10000", "--seed", "2", "--out", s(&report)]);
    assert_eq!(code, 0, "{stdout}");
    assert!(std::fs::read_to_string(&report).unwrap().contains("pass = true"));

    let (code, stdout, _) =
        aptb(&["dpcheck", "--fixture", "mixed", "--eps", "1.0", "--trials", "10000", "--seed", "2", "--test-fault", "boost=10"]);
    assert_eq!(code, 5, "{stdout}");
    assert!(stdout.contains("pass = false"));

    assert_eq!(run(&["dpcheck", "--fixture", "mixed", "--eps", "1.0", "--trials", "100", "--seed", "2"]), 2);
    assert_eq!(run(&["dpcheck", "--fixture", "nope", "--eps", "1.0", "--seed", "2"]), 2);

    let big = sample15(dir.path());
    assert_eq!(run(&["dpcheck", "--in", s(&big), "--eps", "1.0", "--trials", "10000", "--seed", "2"]), 2);
}

#[test]
fn synth_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.traj");
    assert_eq!(run(&["synth", "--rows", "5", "--cols", "4", "--slots", "4", "--n", "10000", "--seed", "1", "--out", s(&out)]), 0);
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(sha256_hex(&bytes), "3259e4202bf087b03653dd431dac115630a97682c01186b6e994eb85161c5bce");

    let empty = dir.path().join("e.traj");
    assert_eq!(run(&["synth", "--rows", "2", "--cols", "2", "--slots", "2", "--n", "0", "--seed", "1", "--out", s(&empty)]), 0);
    let text = std::fs::read_to_string(&empty).unwrap();
    assert_eq!(text, "universe rows=2 cols=2 slots=2\n");
    assert!(aptb_core::Dataset::parse(&text).unwrap().is_empty());

    assert_eq!(run(&["synth", "--rows", "-1", "--cols", "2", "--slots", "2", "--n", "1", "--seed", "1", "--out", s(&empty)]), 2);
    assert_eq!(run(&["synth", "--rows", "0", "--cols", "2", "--slots", "2", "--n", "1", "--seed", "1", "--out", s(&empty)]), 2);
}
