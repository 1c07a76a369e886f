use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An interior up-probability is zero, so the top state is never reached
    /// from below it.
    #[error("consensus unreachable: up-probability is zero at state {state}")]
    Unreachable { state: usize },

    #[error("a-coefficient undefined: up-probability is zero at state {state}")]
    ZeroUpProbability { state: usize },

    #[error("entry {index} must be positive, got {value}")]
    NonPositive { index: usize, value: f64 },

    #[error(
        "n = {n} too small for certificate with z = {z}: (1 - 4z/n)^n = {lhs:.6e} < exp(-4z)/2 = {rhs:.6e}"
    )]
    TooSmall {
        n: usize,
        z: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("no chain representation for stateful dynamics")]
    StatefulDynamics,

    #[error("{}: line {line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line front end: 1 for usage
    /// problems, 2 for violated preconditions or failed certificates, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::StatefulDynamics => 1,
            Error::Unreachable { .. }
            | Error::ZeroUpProbability { .. }
            | Error::NonPositive { .. }
            | Error::TooSmall { .. }
            | Error::Precondition(_)
            | Error::CertificateFailed(_) => 2,
            Error::Parse { .. } | Error::Io { .. } | Error::Json(_) => 3,
        }
    }
}
