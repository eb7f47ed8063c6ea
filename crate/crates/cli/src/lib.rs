//! Batch experiments for the `svilab` solvers: configuration files, trace
//! output and the `run`, `check` and `bound` commands.

use std::path::PathBuf;

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

pub use args::{execute, Cli, Command};
pub use config::{parse_config, parse_config_file, ExperimentConfig, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Semantic { key: String, message: String },
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl ConfigError {
    pub fn semantic(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Run(_) => EXIT_RUN_FAILURE,
        }
    }
}
