use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("t = {t} lies outside the finite trajectory domain [0, 1]")]
    Domain { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("source sequence {index} has {len} points, need at least {required}")]
    SequenceTooShort {
        index: usize,
        len: usize,
        required: usize,
    },

    #[error("loss became non-finite ({loss}) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
