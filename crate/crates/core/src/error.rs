use thiserror::Error;

/// Errors raised anywhere in the model, integrator, estimators or control solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input outside the admissible domain: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value produced at step {step}")]
    Blowup { step: usize },

    #[error("trajectory {stream_id} failed: {source}")]
    Trajectory {
        stream_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("outside the regime of validity: {0}")]
    Regime(String),

    #[error("path carries no driver record")]
    MissingDriverRecord,

    #[error("estimator input error: {0}")]
    Estimator(String),

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn with_stream(self, stream_id: u64) -> Self {
        Error::Trajectory {
            stream_id,
            source: Box::new(self),
        }
    }
}
