use thiserror::Error;

/// Errors raised by problem construction, oracles, solvers and metrics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite value at coordinate {index} ({context})")]
    NonFinite { index: usize, context: String },

    #[error("non-finite per-sample gradient at sample {sample}, coordinate {index}")]
    NonFiniteSample { sample: u64, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid feasible set: {0}")]
    InvalidSet(String),

    #[error("infeasible iterate at coordinate {index}: {value}")]
    Infeasible { index: usize, value: f64 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
