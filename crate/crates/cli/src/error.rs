use ckdv_core::CkdvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] CkdvError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Inequality failures are not errors: commands report them through their
/// exit status (3) after writing every output file.
impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(e) => match e {
                CkdvError::InvalidGrid(_)
                | CkdvError::InvalidParameter(_)
                | CkdvError::DomainFit { .. }
                | CkdvError::TimeStepTooLarge { .. } => 1,
                _ => 2,
            },
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
