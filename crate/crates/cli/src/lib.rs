//! Library surface of the `pide-lab` command-line tool: configuration
//! loading, the experiment commands and the SVG emitters. The binary in
//! `main.rs` is a thin clap wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod plot;

/// CLI failures, split by exit code: configuration problems exit with 2,
/// numerical failures with 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
