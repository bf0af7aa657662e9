use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A special function was called outside its domain.
    #[error("{function}: argument {value} is outside the domain (x > 0, finite)")]
    Domain { function: &'static str, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// `exp(z)` of a logit does not fit in an f64.
    #[error("logit {value} at index {index} overflows exp()")]
    Overflow { index: usize, value: f64 },

    /// Dirichlet log-density is unbounded: zero label component with alpha < 1.
    #[error("dirichlet density is singular at class {index} (mu = 0, alpha = {alpha})")]
    Singularity { index: usize, alpha: f64 },

    /// Dirichlet density is zero: zero label component with alpha > 1.
    #[error("dirichlet density is zero at class {index} (mu = 0, alpha = {alpha})")]
    ZeroDensity { index: usize, alpha: f64 },

    /// A loss, gradient or parameter became NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A numerical failure during training, with its location.
    #[error("epoch {epoch}, batch {batch}, utterance {utterance}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        utterance: String,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Domain { .. }
            | Error::Overflow { .. }
            | Error::Singularity { .. }
            | Error::ZeroDensity { .. }
            | Error::NonFinite(_) => true,
            Error::Training { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
