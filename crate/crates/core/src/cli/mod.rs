//! The `oddball` executable: `validate`, `score`, `tune`, `eval` and
//! `report`.
//!
//! Exit status is 0 on success, 1 when inputs fail validation or evaluation,
//! and 2 for usage and I/O errors.

mod args;
mod commands;

pub use args::{Cli, Command, ConfigFile, ReportArgs, RunArgs};

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}

pub fn run(cli: Cli) -> Result<u8, CliError> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Validate { dump } => commands::validate(&dump),
        Command::Score(a) => commands::score(a.merged(&config.run)),
        Command::Tune(a) => commands::tune(a.merged(&config.run)),
        Command::Eval(a) => commands::eval(a.merged(&config.run)),
        Command::Report(a) => commands::report(a.merged(&config.report)),
    }
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
