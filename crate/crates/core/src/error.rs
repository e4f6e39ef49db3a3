use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects that must share a time grid do not.
    #[error("incompatible grids: {0}")]
    IncompatibleGrid(String),

    /// A trajectory produced a non-finite value.
    #[error("non-finite value in component {component} at step {step} (t = {time})")]
    NonFinite {
        component: usize,
        step: usize,
        time: f64,
    },

    /// A numerical construction could not be completed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
