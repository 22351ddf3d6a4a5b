use thiserror::Error;

/// Errors raised by the chart library.
///
/// Variants split into two families: input validation (a parameter is out of
/// its admissible range) and numerical domain failures (the inputs are
/// well-formed but the requested quantity does not exist or cannot be
/// computed). [`Error::is_numerical`] tells them apart, which the CLI uses to
/// pick an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transition matrix is not stationary: spectral radius {spectral_radius:.12} >= {bound}")]
    NonStationary { spectral_radius: f64, bound: f64 },

    #[error("singular system while {context}")]
    Singular { context: &'static str },

    #[error("matrix `{name}` is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { name: &'static str, min_eigenvalue: f64 },

    #[error("ratio quantile approximation undefined at tail probability {p}: {reason}")]
    ApproximationDomain { p: f64, reason: &'static str },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of the numerics rather than of the inputs' form.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonStationary { .. }
                | Error::Singular { .. }
                | Error::NotPositiveSemiDefinite { .. }
                | Error::ApproximationDomain { .. }
                | Error::Estimation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
