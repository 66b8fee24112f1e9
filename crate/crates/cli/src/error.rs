use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// `2` for configuration problems, `3` for numeric or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }

    /// Maps a core error raised while running `mode`; argument and model
    /// errors are attributed to `path`.
    pub fn from_core(path: &str, e: lpl_core::Error) -> Self {
        use lpl_core::Error as E;
        match e {
            E::InvalidMeasure { .. }
            | E::InvalidTriplet(_)
            | E::InvalidBranching { .. }
            | E::InvalidArgument { .. }
            | E::InfiniteActivity(_) => CliError::config(path, e.to_string()),
            E::ExponentUndefined(_) | E::Divergent(_) | E::Degenerate(_) | E::Numeric(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}
