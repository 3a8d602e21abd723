use std::path::PathBuf;

use crate::observables::RatioResult;
use crate::quadrature::IntegralResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integral `{what}` did not converge ({} evaluations, error estimate {:.3e} for value {:.6e})", .result.evals, .result.error_estimate, .result.value)]
    NotConverged {
        what: String,
        result: IntegralResult,
    },

    /// A ratio was assembled but at least one of its integrals is unconverged.
    /// The partial result is kept so callers can record it.
    #[error("enhancement ratio did not converge (R = {:.6e})", .partial.r)]
    RatioNotConverged { partial: Box<RatioResult> },

    #[error("channel `{0}` has multipole order > 1 and needs a kernel")]
    MissingKernel(String),

    #[error("degenerate ratio: {0}")]
    Degenerate(String),

    #[error("Monte Carlo estimate has zero effective sample size")]
    ZeroEffectiveSamples,
}

impl Error {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by numerical non-convergence rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::RatioNotConverged { .. }
                | Error::ZeroEffectiveSamples
                | Error::Degenerate(_)
        )
    }
}
