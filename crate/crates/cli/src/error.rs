use std::path::Path;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub(crate) fn read(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub(crate) fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("writing {}: {e}", path.display()))
    }
}

impl From<pmf_core::Error> for CliError {
    fn from(e: pmf_core::Error) -> Self {
        use pmf_core::Error as E;
        match e {
            E::Parameter(_) => CliError::Usage(e.to_string()),
            E::Dimension(_) | E::Duplicate { .. } | E::IndexOutOfRange { .. } | E::Evaluation(_) | E::Format(_) | E::Io(_) => {
                CliError::Data(e.to_string())
            }
            E::NotPositiveDefinite { .. } | E::Singular(_) | E::Allocation { .. } | E::Measurement(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
