use std::process::ExitCode;

use thiserror::Error;
use tvsvm::data::DataError;
use tvsvm::kernel::KernelError;
use tvsvm::svm::ModelError;
use tvsvm::train::TrainError;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or unsuitable input data (exit 3).
    #[error("{0}")]
    Data(String),
    /// Divergence or failed numerical verification (exit 4).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::Kernel(KernelError::NonFinite { .. }) | ModelError::NonFinite => {
            CliError::Numerical(e.to_string())
        }
        ModelError::Kernel(KernelError::HistogramRange { .. }) => CliError::Data(format!(
            "{e} (histogram intersection needs features in [0, 1]; try --normalize minmax)"
        )),
        ModelError::Kernel(_) | ModelError::Net(_) | ModelError::InvalidC(_) => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        model_error(e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Usage(m),
            TrainError::Net(n) => CliError::Usage(n.to_string()),
            TrainError::Data(m) => CliError::Data(m),
            TrainError::Model(m) => model_error(m),
        }
    }
}
