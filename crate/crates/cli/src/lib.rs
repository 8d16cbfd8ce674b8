//! Driver for `tlme-core`: JSON configs in, CSV files out.
//!
//! Every output file starts with `#` lines recording the schema version,
//! the SHA-256 of the canonical config and the seed, so a rerun with the
//! same inputs can be checked byte for byte.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

use std::path::{Path, PathBuf};

pub use commands::{execute, Command, Flags, Outputs};
pub use config::RunConfig;
pub use error::CliError;

/// What a finished run wrote.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Loads `config`, runs `command` and writes its CSV files into `out_dir`.
///
/// Files are written only after the command has finished, one at a time.
pub fn run(
    command: Command,
    config: &Path,
    out_dir: &Path,
    flags: Flags,
    warn: &mut dyn FnMut(&str),
) -> Result<RunReport, CliError> {
    let cfg = RunConfig::load(config)?;
    let outputs = execute(&cfg, command, flags, warn)?;
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::with_capacity(outputs.files.len());
    for (name, doc) in &outputs.files {
        let path = out_dir.join(name);
        std::fs::write(&path, doc.as_str())?;
        files.push(path);
    }
    Ok(RunReport {
        passed: outputs.passed,
        files,
        summary: outputs.summary,
    })
}
