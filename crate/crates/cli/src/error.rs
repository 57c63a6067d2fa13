use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {reason}", location(*line, key.as_deref()))]
    Config {
        line: Option<usize>,
        key: Option<String>,
        reason: String,
    },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] molcomm::Error),

    #[error("cannot read `{path}`: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),

    #[error("cannot write output: {0}")]
    Csv(#[from] csv::Error),
}

fn location(line: Option<usize>, key: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(line) = line {
        let _ = write!(s, " at line {line}");
    }
    if let Some(key) = key {
        let _ = write!(s, "{} key `{key}`", if line.is_some() { "," } else { " at" });
    }
    s
}

impl CliError {
    /// Model parameter errors raised while building a run are config errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Model(_) | CliError::Read { .. } => 2,
            CliError::Write(_) | CliError::Csv(_) => 1,
        }
    }
}
