use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A workflow tree or graph violates its structural invariants.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("graph contains a cycle; nodes never became ready: {0:?}")]
    Cycle(Vec<String>),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unknown location {0}")]
    UnknownLocation(u32),

    /// Inputs are individually valid but do not fit together (missing picks, bad references).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported problem structure: {0}")]
    Unsupported(String),

    #[error("search space of {size:.3e} assignments exceeds the cap of {cap:.3e}")]
    SearchSpaceTooLarge { size: f64, cap: f64 },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the caller's inputs rather than the environment.
    pub fn is_configuration(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
