use thiserror::Error;

/// Failure classes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("matrix is not positive definite: {0}")]
    Decomposition(String),
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("degenerate component {component}: {reason}")]
    Degenerate { component: usize, reason: String },
    #[error("missingness generation failed: {0}")]
    Generation(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("model search failed: {0}")]
    Search(String),
}

impl Error {
    /// True for failures caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Decomposition(_) | Error::Degenerate { .. } | Error::Fit(_) | Error::Search(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
