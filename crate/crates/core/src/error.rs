use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input outside domain: {0}")]
    Domain(String),

    #[error("observation index {index} out of range (have {len})")]
    Index { index: usize, len: usize },

    #[error("point lies outside the prior support")]
    OutsideSupport,

    #[error("enumeration would visit {projected:.3e} points, above the limit of {limit}")]
    EnumerationLimit { projected: f64, limit: usize },

    #[error("rejection budget of {budget} draws exhausted")]
    RejectionBudget { budget: usize },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than by a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Domain(_)
                | Error::Index { .. }
                | Error::OutsideSupport
                | Error::EnumerationLimit { .. }
        )
    }

    pub fn is_sampler(&self) -> bool {
        matches!(self, Error::RejectionBudget { .. } | Error::Sampler(_))
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
