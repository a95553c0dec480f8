use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Caller broke an interface contract (dimension or count mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("integration diverged at t = {time:e} (x = {value:e})")]
    Divergence { time: f64, value: f64 },

    /// Fixed-point iteration did not settle; the system is likely oscillating or chaotic.
    #[error("no stable operating point: {0}")]
    Regime(String),

    #[error("signal too short: need {needed} samples, have {available}")]
    Length { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("rank deficient system: {0}")]
    Rank(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("not enough samples: {0}")]
    Statistics(String),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("reservoir diverged on input step {step}: {source}")]
    RunDivergence {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    /// True for numerical blow-ups, which a sweep records as a failed row
    /// instead of aborting.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::RunDivergence { .. })
    }
}
