use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    /// The requested tube radius is below what the sampling lattice resolves.
    #[error("resolution guard: delta {delta} < 2 * max spacing {max_h}")]
    Resolution { delta: f64, max_h: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty nodal set")]
    EmptyNodalSet,

    #[error("zero average over a starred box")]
    ZeroAverage,

    #[error("cache format: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
