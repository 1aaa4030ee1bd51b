use thiserror::Error;

/// Errors raised by the models, estimators and applications.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("order {order} is outside the valid regime at y = {y}; need m >= {min_order}")]
    Domain { order: u32, y: f64, min_order: u32 },

    #[error("design rejected: {0}")]
    DesignRejected(String),

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver tolerance failure: {0}")]
    ToleranceFailure(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("inadmissible error rates: {0}")]
    InadmissibleRates(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::IncompleteData(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
