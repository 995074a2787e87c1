use std::fs::File;
use std::io::{self, BufWriter, Read};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chord_cli::config::{Overrides, SceneConfig};
use chord_cli::replay::{describe, replay, ReplayError};
use chord_cli::report::{write_rows, Status};
use chord_cli::run::{exit_code, run_scene, EXIT_ERROR, EXIT_OK, EXIT_VIOLATION};
use chord_cli::selftest;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chordbench",
    version,
    about = "Chord integrals, Orlicz chord addition and inequality checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a TOML scene and write a CSV report.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Quadrature rule id, e.g. gauss3:48x96 or circle:256.
        #[arg(long)]
        rule: Option<String>,
        /// CSV destination; `-` for stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a check from its inputs digest (JSON text, or @path).
    Replay { digest: String },
    /// Run the built-in acceptance suite.
    Selftest {
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open_output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn io::Write>> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(config: PathBuf, overrides: Overrides) -> anyhow::Result<i32> {
    let scene = match SceneConfig::load(&config).and_then(|c| c.resolve(&overrides)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("ConfigError: {e}");
            return Ok(EXIT_ERROR);
        }
    };
    let rows = run_scene(&scene);
    write_rows(open_output(scene.output.as_ref())?, &rows)?;
    let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
    eprintln!(
        "{} rows: {} ok, {} violated, {} error",
        rows.len(),
        count(Status::Ok),
        count(Status::Violated),
        count(Status::Error)
    );
    Ok(exit_code(&rows))
}

fn read_digest(arg: &str) -> anyhow::Result<String> {
    match arg.strip_prefix('@') {
        Some("-") => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
        Some(path) => {
            std::fs::read_to_string(path).with_context(|| format!("cannot read digest file {path}"))
        }
        None => Ok(arg.to_string()),
    }
}

fn replay_cmd(arg: &str) -> anyhow::Result<i32> {
    match replay(&read_digest(arg)?) {
        Ok(report) => {
            print!("{}", describe(&report));
            Ok(if report.holds() {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            })
        }
        Err(e @ ReplayError::DigestParse(_)) | Err(e @ ReplayError::Check(_)) => {
            eprintln!("{e}");
            Ok(EXIT_ERROR)
        }
    }
}

fn selftest_cmd(seed: u64, out: Option<PathBuf>) -> anyhow::Result<i32> {
    let mut results = Vec::new();
    for id in 1..=selftest::criterion_count() as u32 {
        let r = selftest::run_criterion(id, seed);
        eprintln!(
            "{} criterion {}: {} (metric {:.3e}, tolerance {:.1e}, {:.1}s)",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.metric,
            r.tolerance,
            r.wall_time_s
        );
        results.push(r);
    }
    selftest::write_csv(open_output(out.as_ref())?, &results)?;
    Ok(if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = chord_cli::configure_threads().and_then(|()| match cli.command {
        Command::Run {
            config,
            seed,
            rule,
            out,
        } => run(config, Overrides { seed, rule, out }),
        Command::Replay { digest } => replay_cmd(&digest),
        Command::Selftest { seed, out } => selftest_cmd(seed, out),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
