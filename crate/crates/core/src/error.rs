use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unstable trap: a + q^2/2 = {0} must be positive")]
    UnstableTrap(f64),

    #[error("outside the first stability zone: amplitudes grow at rate {0:.3e} per unit time")]
    MathieuUnstable(f64),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("out of scope: {0}")]
    Scope(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
