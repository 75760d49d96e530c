use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A dipole of zero length was supplied for an allowed transition.
    #[error("forbidden transition {}: dipole has zero norm", .0.join(", "))]
    ZeroDipole(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid rates: {0}")]
    InvalidRates(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The generator's eigenbasis cannot be used; callers should switch to
    /// ODE propagation.
    #[error("eigenbasis unusable ({reason}); fall back to ODE propagation")]
    EigenFallback { reason: String },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error(
        "ambiguous null-space dimension: relative singular values {singular_values:?} \
         fall between the zero and nonzero thresholds"
    )]
    AmbiguousNullSpace { singular_values: Vec<f64> },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("sampling error: {0}")]
    Sampling(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to invalid
    /// input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenFallback { .. }
                | Error::Integration { .. }
                | Error::AmbiguousNullSpace { .. }
                | Error::Analysis(_)
                | Error::Sampling(_)
        )
    }
}
