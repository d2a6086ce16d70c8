use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A table or enumeration would exceed the configured entry budget.
    #[error("budget exceeded: {what} needs {needed} entries, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("scheme {0} is not supported here")]
    UnsupportedScheme(crate::sampling::Scheme),

    #[error("patient-contrastive sampling needs a pool of at least two trajectories")]
    MissingPool,

    #[error("epsilon0 = {0} is not positive; the representation is not identifiable")]
    NotIdentifiable(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}
