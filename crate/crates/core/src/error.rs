use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("history grids differ ({left} vs {right} nodes per unit)")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite field value at t = {t} (x = {x:?}, y = {y:?})")]
    NonFinite { t: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("solution blew up at t = {at}")]
    BlowUp { at: f64 },

    #[error("time {t} outside of [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("history not in the interior of the positive cone ({0})")]
    NotInInterior(String),

    #[error("window underflow: need left margin {needed}, have {available}")]
    WindowUnderflow { needed: f64, available: f64 },

    #[error("sub-equilibrium property violated: {0}")]
    SemiEquilibriumViolated(String),

    #[error("exponential decay not detected: {0}")]
    DecayFailure(String),

    #[error("assumption not met: {0}")]
    Assumption(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
