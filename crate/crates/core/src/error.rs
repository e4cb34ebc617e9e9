use thiserror::Error;

/// Errors raised by the detection engine and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("p-value {0} outside (0, 1]")]
    PValueDomain(f64),

    #[error("invalid sparsity parameters: {0}")]
    InvalidSparsity(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("window {k} unavailable (time {time}, capacity {capacity})")]
    WindowUnavailable { k: usize, time: u64, capacity: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("threshold bracket [{lo}, {hi}] does not bracket the target ARL {target}")]
    NonBracketing { lo: f64, hi: f64, target: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{censored} of {trials} trials hit the horizon {horizon}")]
    Censored { censored: usize, trials: usize, horizon: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
