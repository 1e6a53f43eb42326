use thiserror::Error;

/// Error type shared by all modules.
///
/// `Input` covers malformed data handed in by a caller, `Contract` covers
/// violated pre/postconditions between pipeline stages, and `ClaimViolation`
/// marks a structural guarantee that the algorithm relies on but that failed
/// at runtime; the CLI maps these to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("stage contract violated: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal claim violated: {0}")]
    ClaimViolation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn claim(msg: impl Into<String>) -> Self {
        Error::ClaimViolation(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
