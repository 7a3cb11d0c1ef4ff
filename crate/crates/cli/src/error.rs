use dtigp_core::Error as CoreError;
use thiserror::Error;

/// Failure of one command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training made no progress: {0}")]
    NoProgress(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NoProgress(_) => 4,
            CliError::Selection(_) => 5,
            CliError::Evaluation(_) => 6,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Pipeline stage an error surfaced in.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Data,
    Train,
    Select,
    Evaluate,
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> CliResult<T>;
}

impl<T> AtStage<T> for std::result::Result<T, CoreError> {
    fn at(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| {
            let msg = e.to_string();
            match (stage, &e) {
                (_, CoreError::NoProgress { .. }) => CliError::NoProgress(msg),
                (Stage::Data, _) => CliError::Data(msg),
                // non-finite or indefinite state reached while optimizing
                (Stage::Train, CoreError::NotPositiveDefinite { .. }) => CliError::NoProgress(msg),
                (Stage::Train, _) => CliError::Data(msg),
                (Stage::Select, _) => CliError::Selection(msg),
                (Stage::Evaluate, _) => CliError::Evaluation(msg),
            }
        })
    }
}
