use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("step produced a non-finite value at t = {t} (dt = {dt}): dt too large")]
    StepDiverged { t: f64, dt: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("basis too large: {0}")]
    BasisTooLarge(String),

    #[error("domain mask is disconnected: {0}")]
    DisconnectedDomain(String),

    #[error("convention mismatch: {0}")]
    ConventionMismatch(String),

    #[error("eigensolver failure: {0}")]
    Solver(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
