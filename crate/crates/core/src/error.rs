use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("missing resource(s): {}", display_paths(.0))]
    Missing(Vec<PathBuf>),

    #[error("model required: {0}")]
    ModelRequired(String),

    #[error("ICA did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("rank deficient input: cannot extract {requested} components (rank {rank})")]
    RankDeficient { requested: usize, rank: usize },

    #[error("training refused: {0}")]
    Training(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Process exit code used by the command line tool.
    ///
    /// 0 success, 2 input parse or configuration, 3 corrupt data,
    /// 4 missing resource, 5 internal invariant breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Scene(_)
            | Error::Parse { .. }
            | Error::Training(_) => 2,
            Error::Corrupt(_) | Error::Dimension(_) => 3,
            Error::Missing(_) | Error::ModelRequired(_) => 4,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 4,
            Error::Io(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => 3,
            Error::Io(_) => 5,
            Error::NotConverged { .. } | Error::RankDeficient { .. } | Error::Invariant(_) => 5,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
