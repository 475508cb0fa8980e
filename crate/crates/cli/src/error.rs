use std::path::Path;

use thiserror::Error;
use vfd_bench::BenchError;
use vfd_data::DataError;
use vfd_media::MediaError;
use vfd_mining::MiningError;
use vfd_model::ModelError;
use vfd_train::TrainError;

/// Exit code 1 for contract violations, 2 for I/O failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Contract(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Contract(msg.into()))
}

impl From<MediaError> for CliError {
    fn from(e: MediaError) -> Self {
        match e {
            MediaError::Io { .. } | MediaError::Codec { .. } => CliError::Io(e.to_string()),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<MiningError> for CliError {
    fn from(e: MiningError) -> Self {
        match e {
            MiningError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            DataError::Media(m) => m.into(),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Data(d) => d.into(),
            TrainError::Media(m) => m.into(),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io { .. } => CliError::Io(e.to_string()),
            BenchError::Data(d) => d.into(),
            BenchError::Media(m) => m.into(),
            BenchError::Mining(m) => m.into(),
            BenchError::Model(m) => m.into(),
            BenchError::Train(t) => t.into(),
            _ => CliError::Contract(e.to_string()),
        }
    }
}
