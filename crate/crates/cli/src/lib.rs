//! Config-driven runner: parse a JSON config, run one mode, write a
//! deterministic report.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

use std::path::Path;
use std::time::Instant;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{emit_report, resolve_seed, run, RunOutput};

/// Parses `text`, runs it and writes everything under `dir`.
pub fn execute(text: &str, dir: &Path, seed: Option<u64>) -> Result<RunOutput, CliError> {
    let mut config = RunConfig::parse(text)?;
    if seed.is_some() {
        config.seed = seed;
    }
    resolve_seed(&mut config);
    let start = Instant::now();
    let output = run(&config)?;
    emit_report(&output, dir, start.elapsed().as_secs_f64())?;
    Ok(output)
}
