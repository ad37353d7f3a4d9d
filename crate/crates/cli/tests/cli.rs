//! End-to-end tests driving the binary over the shipped spec files.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ascension"))
}

fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join("specs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(args: &[&str]) -> String {
    String::from_utf8(run_ok(args).stdout).unwrap()
}

#[test]
fn classify_long_range_and_lamplighter() {
    let lr = specs_dir().join("long_range.spec");
    let text = stdout(&["classify", "--spec", lr.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["overall"]["degree"], 1);
    let states = v["states"].as_array().unwrap();
    let degree_of = |name: &str| {
        states
            .iter()
            .find(|s| s["name"] == name)
            .map(|s| s["degree"]["degree"].as_i64().unwrap())
            .unwrap()
    };
    assert_eq!(degree_of("a"), 1);
    assert_eq!(degree_of("b"), 0);

    let lamp = specs_dir().join("lamplighter.spec");
    let text = stdout(&["classify", "--spec", lamp.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["overall"]["kind"], "Exponential");
}

#[test]
fn collapse_preserves_states_and_grows_alphabet() {
    let lr = specs_dir().join("long_range.spec");
    let text = stdout(&["collapse", "--spec", lr.to_str().unwrap(), "--k", "2"]);
    assert!(text.starts_with("m = 4"));
    assert_eq!(text.matches("state ").count(), 2);
}

#[test]
fn schreier_level_one_edges() {
    let lr = specs_dir().join("long_range.spec");
    let text = stdout(&["schreier", "--spec", lr.to_str().unwrap(), "--level", "1"]);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.sort();
    assert_eq!(lines.len(), 4);
    // b swaps 0 and 1, a fixes both.
    assert!(lines.contains(&"0 a 0"));
    assert!(lines.contains(&"0 b 1"));
    assert!(lines.contains(&"1 b 0"));
}

#[test]
fn mother_spec_round_trips_through_classify() {
    let dir = tempdir();
    let spec_path = dir.join("mother.spec");
    run_ok(&[
        "--out",
        spec_path.to_str().unwrap(),
        "mother",
        "--m",
        "3",
        "--r",
        "1",
    ]);
    let text = stdout(&["classify", "--spec", spec_path.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["overall"]["degree"], 1);
}

#[test]
fn level_sample_is_seed_deterministic() {
    let args = ["level-sample", "--m", "3", "--k", "1", "--n", "5"];
    let a = stdout(&["--seed", "9"].iter().chain(&args).copied().collect::<Vec<_>>().as_slice());
    let b = stdout(&["--seed", "9"].iter().chain(&args).copied().collect::<Vec<_>>().as_slice());
    let c = stdout(&["--seed", "10"].iter().chain(&args).copied().collect::<Vec<_>>().as_slice());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn evaluate_exact_reports_probability_mass() {
    let measure = specs_dir().join("half_q0_qm1.measure");
    let text = stdout(&[
        "evaluate",
        "--m",
        "2",
        "--pattern-file",
        measure.to_str().unwrap(),
        "--mode",
        "exact",
    ]);
    assert!(text.contains("# mass 1 defect 0"), "{text}");
    // Identity carries weight 1/2, the two generators 1/4 each.
    assert!(text.lines().any(|l| l.starts_with("0.5\t1\t")), "{text}");
}

#[test]
fn ascend_diagnostics_drain_rooted_mass() {
    let measure = specs_dir().join("half_q0_qm1.measure");
    let text = stdout(&[
        "ascend",
        "--measure",
        measure.to_str().unwrap(),
        "--m",
        "2",
        "--iterations",
        "40",
    ]);
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 41);
    let eps0 = rows[0]["eps"].as_f64().unwrap();
    let eps_last = rows.last().unwrap()["eps"].as_f64().unwrap();
    assert!((eps0 - 0.5).abs() < 1e-12);
    assert!(eps_last < 1e-3);
}

#[test]
fn ascend_sample_emits_patterns() {
    let measure = specs_dir().join("half_q0_qm1.measure");
    let text = stdout(&[
        "--seed",
        "4",
        "ascend-sample",
        "--measure",
        measure.to_str().unwrap(),
        "--m",
        "2",
        "--n",
        "20",
    ]);
    assert_eq!(text.lines().count(), 20);
    for line in text.lines() {
        assert!(line == "e" || line.split_whitespace().all(|t| t.starts_with('q')));
    }
}

#[test]
fn walk_endpoints_and_entropy_series() {
    let measure = specs_dir().join("half_q0_qm1.measure");
    let text = stdout(&[
        "--seed",
        "3",
        "walk",
        "--m",
        "2",
        "--measure",
        measure.to_str().unwrap(),
        "--n",
        "8",
        "--walks",
        "4",
    ]);
    assert_eq!(text.lines().count(), 4);

    let csv = stdout(&[
        "--seed",
        "3",
        "entropy",
        "--steps",
        measure.to_str().unwrap(),
        "--m",
        "2",
        "--horizons",
        "4,16",
        "--N",
        "2000",
    ]);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,H_hat,H_hat_mm,se,H_over_n,depth,distinct_keys"
    );
    assert_eq!(lines.count(), 2);
    // Inline pattern spec is accepted too.
    let csv2 = stdout(&[
        "--seed",
        "3",
        "entropy",
        "--steps",
        "pattern:0.5 q0;0.5 q-1",
        "--m",
        "2",
        "--horizons",
        "4,16",
        "--N",
        "2000",
    ]);
    assert_eq!(csv, csv2);
}

#[test]
fn verify_fast_suite_passes() {
    let text = stdout(&["verify", "fixed-points"]);
    assert!(text.contains("[PASS] fixed-points"));
    let list = stdout(&["verify", "--list"]);
    assert!(list.lines().count() >= 10);
    // Unknown suite is a usage error.
    let out = bin().args(["verify", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_records_are_reproducible() {
    let dir = tempdir();
    let out_csv = dir.join("series.csv");
    let config = serde_json::json!({
        "argv": [
            "--seed", "11",
            "--out", out_csv.to_str().unwrap(),
            "entropy",
            "--steps", specs_dir().join("half_q0_qm1.measure").to_str().unwrap(),
            "--m", "2",
            "--horizons", "4,8",
            "--N", "500",
        ],
        "outputs": [out_csv.to_str().unwrap()],
    });
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let digest = |raw: &str| {
        let v: serde_json::Value = serde_json::from_str(raw).unwrap();
        v["outputs"][0]["sha256"].as_str().unwrap().to_string()
    };
    let a = digest(&stdout(&["run", "--config", config_path.to_str().unwrap()]));
    let b = digest(&stdout(&["run", "--config", config_path.to_str().unwrap()]));
    assert_eq!(a, b);

    // Missing input file: structured error, exit code 2.
    let bad = dir.join("nope.json");
    let out = bin()
        .args(["run", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "ascension-cli-test-{}-{}",
        std::process::id(),
        std::thread::current().name().unwrap_or("t").replace("::", "-")
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
