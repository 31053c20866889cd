use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid construction: {0}")]
    Construction(String),
    #[error("numeric failure in {what} after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("singular conjugation: inf h = {0:e} is below 1e-12")]
    SingularConjugation(f64),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Numeric(_) | Error::SingularConjugation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
