use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments whose shapes or values violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A configuration cannot be realized (e.g. a search window too small for the group size).
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal invariant was found broken.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The objective increased between two iterates computed under the same block-matching plan.
    #[error("descent violated at iteration {iteration}: phi went from {before:e} to {after:e}")]
    DescentViolation {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Format(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Integrity(_) | Error::DescentViolation { .. } => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
