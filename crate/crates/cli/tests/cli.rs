use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chord_cli::report::strip_wall_time;

fn chordbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn records(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

const UNIT_BALL: &str = r#"
dimension = 3
rule = "gauss3:16x32"
[bodies.b]
kind = "ball"
radius = 1.0
[[tasks]]
type = "integrate"
functional = "chord_integral"
bodies = ["b"]
"#;

#[test]
fn integrate_unit_ball() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ball.toml", UNIT_BALL);
    let out = chordbench(&["run", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = records(&text);
    assert_eq!(rows.len(), 1);
    let value: f64 = rows[0][7].parse().unwrap();
    assert!((value - 4.1887902047863905).abs() < 1e-10);
    assert!(rows[0][7].starts_with("4.1887902"));
}

#[test]
fn dilate_pair_reports_equality_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.csv");
    let cfg = configs().join("dilate_pair.toml");
    let out = chordbench(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = records(&std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(rows.len(), 7);
    for r in &rows {
        assert_eq!(&r[13], "true", "{r:?}");
        assert_eq!(&r[14], "ok");
    }
}

#[test]
fn tour_config_runs_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.csv");
    let cfg = configs().join("scene.toml");
    let out = chordbench(&[
        "run",
        cfg.to_str().unwrap(),
        "--rule",
        "gauss3:24x48",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = records(&std::fs::read_to_string(&out_path).unwrap());
    assert!(rows.iter().all(|r| &r[14] == "ok"));
    assert!(rows.iter().any(|r| &r[0] == "volume"));
}

#[test]
fn bad_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "dimension = 3\nrule = \"gauss3:16x32\"\n[gauges]\ng = { family = \"power\", p = 0.5 }\n",
    );
    let out = chordbench(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("ConfigError") && err.contains("p must be ≥ 1"),
        "{err}"
    );
}

#[test]
fn runs_are_deterministic_and_seed_overridable() {
    let cfg = configs().join("scene.toml");
    let run = |seed: &str| {
        let out = chordbench(&[
            "run",
            cfg.to_str().unwrap(),
            "--rule",
            "gauss3:16x32",
            "--seed",
            seed,
            "--out",
            "-",
        ]);
        assert_eq!(out.status.code(), Some(0));
        strip_wall_time(&String::from_utf8(out.stdout).unwrap())
    };
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));
}

fn first_digest(report: &str, functional: &str) -> String {
    records(report)
        .into_iter()
        .find(|r| &r[2] == functional)
        .map(|r| r[3].to_string())
        .expect("row present")
}

#[test]
fn replay_reproduces_slack_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "search.toml",
        "dimension = 3\nrule = \"gauss3:16x32\"\nseed = 5\n[[tasks]]\ntype = \"search\"\nchecks = [\"orlicz_bm\"]\ntrials = 4\nkeep = 1\n",
    );
    let out = chordbench(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8(out.stdout).unwrap();
    let row = records(&report)
        .into_iter()
        .find(|r| r[0].ends_with("#1"))
        .unwrap();
    let digest_file = write(dir.path(), "digest.json", &row[3]);
    let replayed = chordbench(&["replay", &format!("@{}", digest_file.display())]);
    assert_eq!(replayed.status.code(), Some(0));
    let text = String::from_utf8(replayed.stdout).unwrap();
    assert!(
        text.contains(&format!("slack = {}\n", &row[10])),
        "{text}\nexpected {}",
        &row[10]
    );
}

#[test]
fn replay_of_dilate_witness_keeps_equality() {
    let cfg = configs().join("dilate_pair.toml");
    let out = chordbench(&["run", cfg.to_str().unwrap()]);
    let digest = first_digest(&String::from_utf8(out.stdout).unwrap(), "orlicz_minkowski");
    let replayed = chordbench(&["replay", &digest]);
    assert_eq!(replayed.status.code(), Some(0));
    let text = String::from_utf8(replayed.stdout).unwrap();
    assert!(
        text.contains("equality_flag = true") && text.contains("dilates = true"),
        "{text}"
    );
}

#[test]
fn corrupted_digest_exits_with_error() {
    let out = chordbench(&["replay", "{\"check\":\"lp_bm\",\"p\":"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("DigestParseError"));
}
