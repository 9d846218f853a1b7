use standage_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    #[error("{0}")]
    Invalid(String),
    /// Failure while running; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Format { .. }
            | Error::Dimension(_)
            | Error::Stack(_)
            | Error::Config(_)
            | Error::UnknownPredictors(_)
            | Error::Argument(_)
            | Error::Domain(_)
            | Error::Collision(_) => Self::Invalid(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}
