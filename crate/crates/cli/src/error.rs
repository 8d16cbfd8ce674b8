use thiserror::Error;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scheme unavailable: {0}")]
    SchemeUnavailable(String),

    #[error("invalid model: {0}")]
    Model(tlme_core::Error),

    #[error("numerical failure: {0}")]
    Numerical(tlme_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for numerical failures, 2 for everything the user must fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => 1,
            _ => 2,
        }
    }
}

impl From<tlme_core::Error> for CliError {
    fn from(e: tlme_core::Error) -> Self {
        use tlme_core::Error as E;
        match e {
            E::NotConverged { .. }
            | E::SignalUnderflow { .. }
            | E::LengthMismatch { .. }
            | E::NonFinite => Self::Numerical(e),
            E::NotHermiticityPreserving => Self::SchemeUnavailable(e.to_string()),
            _ => Self::Model(e),
        }
    }
}
