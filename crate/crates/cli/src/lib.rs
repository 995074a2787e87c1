//! Batch runner for chord-core: TOML scene configs, CSV reports, digest
//! replay and the built-in acceptance suite.

pub mod config;
pub mod replay;
pub mod report;
pub mod run;
pub mod selftest;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CHORD_THREADS";

/// Sizes the global rayon pool from `CHORD_THREADS`, if set.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    if threads == 0 {
        anyhow::bail!("{THREADS_ENV} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}
