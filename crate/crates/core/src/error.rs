use thiserror::Error;

/// Errors raised across the OTFS toolkit.
#[derive(Debug, Error)]
pub enum OtfsError {
    #[error("invalid frame geometry: {0}")]
    Geometry(String),
    #[error("input shape mismatch: {0}")]
    Shape(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("nmse undefined: reference channel has zero energy")]
    ZeroEnergyReference,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OtfsError>;
