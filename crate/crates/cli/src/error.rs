use std::io::ErrorKind;

use puffscan::dataset::DataError;
use puffscan::eval::EvalError;
use puffscan::grammar::GrammarError;
use puffscan::models::ModelError;
use puffscan::synth::SynthError;
use thiserror::Error;

/// Command failure, grouped by the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Numeric(String),
    #[error("incompatible inputs: {0}")]
    Compat(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Numeric(_) => 5,
            CliError::Compat(_) => 6,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

fn io_error(path: &std::path::Path, source: &std::io::Error) -> CliError {
    if source.kind() == ErrorKind::NotFound {
        CliError::MissingFile(path.display().to_string())
    } else {
        CliError::Io(format!("{}: {source}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match &e {
            DataError::Io { path, source } => io_error(path, source),
            DataError::SampleRate { .. } => CliError::Compat(e.to_string()),
            DataError::BadRatios(_) | DataError::BadWindowSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::Io { path, source } => io_error(path, source),
            ModelError::NonFiniteLoss { .. } | ModelError::Optimizer { .. } => CliError::Numeric(e.to_string()),
            ModelError::Architecture(_) | ModelError::Config(_) => CliError::Usage(e.to_string()),
            ModelError::Dimension(_) | ModelError::Version(_) | ModelError::FamilyMismatch { .. } => {
                CliError::Compat(e.to_string())
            }
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<GrammarError> for CliError {
    fn from(e: GrammarError) -> Self {
        match &e {
            GrammarError::Config(_) => CliError::Usage(e.to_string()),
            GrammarError::Io { source, .. } if source.kind() == ErrorKind::NotFound => CliError::MissingFile(e.to_string()),
            GrammarError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Io { .. } | EvalError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}
