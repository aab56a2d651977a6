use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The barrier strength is zero, so there are no resonances.
    #[error("no resonances exist for eta = 0")]
    NoResonances,
    /// An iteration or quadrature failed to converge.
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        last_iterate: Option<Complex64>,
    },
    /// A zero-counting contour could not avoid the zeros it was counting.
    #[error("contour geometry: {0}")]
    Geometry(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            message: msg.into(),
            last_iterate: None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
