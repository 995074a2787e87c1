//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-8 run in-process. Criterion 9 runs the `chordbench selftest`
//! binary with a different thread count and compares its CSV with the
//! in-process one, wall-time column excluded.

use std::process::{Command, ExitCode};

use chord_cli::report::strip_wall_time;
use chord_cli::selftest::{self, CriterionResult, DEFAULT_SEED};

fn line(r: &CriterionResult) -> String {
    format!(
        "{} criterion {}: {} | metric {:.3e} tol {:.1e} over {} instances | {} | {:.1}s",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.name,
        r.metric,
        r.tolerance,
        r.instances,
        r.detail,
        r.wall_time_s
    )
}

fn csv_text(results: &[CriterionResult]) -> String {
    let mut buf = Vec::new();
    selftest::write_csv(&mut buf, results).expect("in-memory CSV");
    String::from_utf8(buf).expect("utf-8")
}

fn determinism(in_process: &str) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("selftest.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_chordbench"))
        .args(["selftest", "--seed", &DEFAULT_SEED.to_string(), "--out"])
        .arg(&out)
        .env("CHORD_THREADS", "3")
        .status()
        .map_err(|e| e.to_string())?;
    if status.code().is_none() || status.code() == Some(1) {
        return Err(format!("selftest binary exited with {status}"));
    }
    let from_binary = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    if strip_wall_time(&from_binary) == strip_wall_time(in_process) {
        Ok(())
    } else {
        Err("CSV differs between runs".into())
    }
}

fn main() -> ExitCode {
    let mut all_passed = true;
    let mut results = Vec::new();
    for id in 1..=selftest::criterion_count() as u32 {
        let r = selftest::run_criterion(id, DEFAULT_SEED);
        println!("{}", line(&r));
        all_passed &= r.passed;
        results.push(r);
    }
    match determinism(&csv_text(&results)) {
        Ok(()) => println!("PASS criterion 9: determinism | selftest CSV byte-identical across runs and thread counts, wall time excluded"),
        Err(e) => {
            println!("FAIL criterion 9: determinism | {e}");
            all_passed = false;
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
