//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors reported by the feature-extraction, dataset and training layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// A track carries no usable pose information at all.
    UnusableTrack(String),
    /// Fewer than three distinct face heights were supplied to the
    /// distance regression.
    UnderdeterminedFit { distinct_heights: usize },
    /// The requested split cannot be built from the given data
    /// (for example a balanced split over single-class input).
    InfeasibleSplit(String),
    /// Training produced a non-finite loss.
    Diverged { epoch: usize },
    /// Every trial of a hyperparameter search diverged.
    NoViableConfig,
    /// A search-space bound is not usable for log-uniform sampling.
    InvalidSpace(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::UnusableTrack(id) => write!(f, "track {id} has no usable poses"),
            Error::UnderdeterminedFit { distinct_heights } => write!(
                f,
                "distance fit needs at least 3 distinct face heights, got {distinct_heights}"
            ),
            Error::InfeasibleSplit(msg) => write!(f, "infeasible split: {msg}"),
            Error::Diverged { epoch } => {
                write!(f, "training diverged at epoch {epoch} (non-finite loss)")
            }
            Error::NoViableConfig => write!(f, "every search trial diverged"),
            Error::InvalidSpace(msg) => write!(f, "invalid search space: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
