use core::fmt;

/// Errors raised by the numerical routines of this crate.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Shapes or dimensions do not agree, or violate a model constraint.
    Dimension(&'static str),
    /// A matrix was constructed from a buffer of the wrong length.
    DataLength { expected: usize, got: usize },
    /// A NaN or infinity appeared; `iteration` is set when raised by training.
    NonFiniteState { iteration: Option<usize> },
    /// An iterative solver hit its documented iteration cap.
    IterationLimit { limit: usize },
    /// Quadrature order outside the supported range.
    UnsupportedOrder(usize),
    /// Cholesky failed even after the largest jitter was added.
    CholeskyFailure,
    /// The finite-difference oracle was asked for too many parameters.
    InstanceTooLarge { params: usize, cap: usize },
    /// Not enough points to fit.
    InsufficientData { needed: usize, got: usize },
    /// A log-linear fit saw a loss that is not strictly positive.
    NonPositiveLoss,
    /// Index out of range when selecting a weight entry.
    Index(&'static str),
    /// An argument violates a precondition.
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::DataLength { expected, got } => {
                write!(f, "buffer has {got} entries, expected {expected}")
            }
            Error::NonFiniteState { iteration: Some(it) } => {
                write!(f, "non-finite state at iteration {it}")
            }
            Error::NonFiniteState { iteration: None } => write!(f, "non-finite state"),
            Error::IterationLimit { limit } => {
                write!(f, "solver did not converge within {limit} iterations")
            }
            Error::UnsupportedOrder(order) => write!(f, "unsupported quadrature order {order}"),
            Error::CholeskyFailure => write!(f, "cholesky factorization failed at maximum jitter"),
            Error::InstanceTooLarge { params, cap } => {
                write!(f, "{params} parameters exceed the finite-difference cap of {cap}")
            }
            Error::InsufficientData { needed, got } => {
                write!(f, "need at least {needed} points, got {got}")
            }
            Error::NonPositiveLoss => write!(f, "loss must be strictly positive for a log fit"),
            Error::Index(msg) => write!(f, "index error: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
