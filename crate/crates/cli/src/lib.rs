//! Sensing, recovery, evaluation and benchmark sweeps over measurement bundles.

pub mod bench;
pub mod bundle;
pub mod image;
pub mod pipeline;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad input: {0}")]
    BadInput(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadInput(_) | CliError::Io { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Format(_) => 4,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<bigcs_core::Error> for CliError {
    fn from(e: bigcs_core::Error) -> Self {
        use bigcs_core::Error as E;
        match e {
            E::Diverged { .. } | E::Stage { .. } => CliError::Solver(e.to_string()),
            _ => CliError::BadInput(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
