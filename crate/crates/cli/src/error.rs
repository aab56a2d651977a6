use thiserror::Error;

/// Failure of a CLI run, carrying its process exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 1 usage, 2 domain, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<tgdecay_core::Error> for CliError {
    fn from(e: tgdecay_core::Error) -> Self {
        use tgdecay_core::Error as E;
        match e {
            E::Domain(_) | E::NoResonances => CliError::Domain(e.to_string()),
            E::Numerical { .. } | E::Geometry(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("output not writable: {e}"))
    }
}
