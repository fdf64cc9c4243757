use std::path::PathBuf;

use thiserror::Error;

/// Failure of a CLI command; [`CliError::exit_code`] maps it to the process
/// exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("could not serialize {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("solver failure: {0}")]
    Solver(fracdnl::Error),

    #[error("study incomplete: {}", .0.join("; "))]
    Partial(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Validation(_) => 1,
            CliError::Solver(_) | CliError::Partial(_) => 2,
            CliError::Parse { .. } | CliError::Io { .. } | CliError::Format { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Sorts a library error into bad input (exit 1) or a failed solve (exit 2).
    pub fn from_core(err: fracdnl::Error) -> Self {
        use fracdnl::Error as E;
        match err {
            E::Step { .. } | E::NonConvergence { .. } | E::Resolvent { .. } => CliError::Solver(err),
            E::Parse { line, message } => CliError::Parse { path: PathBuf::new(), line, message },
            other => CliError::Invalid(other.to_string()),
        }
    }
}
