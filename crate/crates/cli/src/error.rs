use std::path::PathBuf;

use synthwrite::clf::{ClfError, ReportError, ScenarioError};
use synthwrite::corpus::CorpusError;
use synthwrite::generator::GeneratorError;
use synthwrite::judge::JudgeError;

use crate::config::ConfigError;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("missing artifact {path}; run `{producer}` first")]
    Missing { path: PathBuf, producer: &'static str },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn judge_code(e: &JudgeError) -> i32 {
    match e {
        JudgeError::Io { .. } | JudgeError::Corpus(_) => EXIT_DATA,
        _ => EXIT_TRAINING,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage(_) | CliError::Corpus(_) | CliError::Report(_) => EXIT_DATA,
            CliError::Scenario(e) => match e {
                ScenarioError::Corpus(_) | ScenarioError::NoImages { .. } | ScenarioError::Report(_) => EXIT_DATA,
                ScenarioError::Judge(j) => judge_code(j),
                ScenarioError::Generator(_) | ScenarioError::Clf(_) => EXIT_TRAINING,
            },
            CliError::Judge(e) => judge_code(e),
            CliError::Generator(GeneratorError::Checkpoint(_)) | CliError::Clf(ClfError::Checkpoint(_)) => EXIT_DATA,
            CliError::Generator(_) | CliError::Clf(_) => EXIT_TRAINING,
        }
    }
}
