use std::path::PathBuf;

/// Errors raised by the learners, the stream tooling and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent input data (dimension mismatch, parse failure, ...).
    #[error("input error: {0}")]
    Input(String),
    /// An invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),
    /// A linear system or weight update that could not be carried out.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A broken internal invariant; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_) | Error::Io { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Internal(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}
