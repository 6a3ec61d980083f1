use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("invalid parameter: {0}")]
    Parameter(cachesim_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(cachesim_core::Error),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn from_core(e: cachesim_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Parameter(e)
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration and parameter errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parameter(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<cachesim_core::Error> for CliError {
    fn from(e: cachesim_core::Error) -> Self {
        CliError::from_core(e)
    }
}
