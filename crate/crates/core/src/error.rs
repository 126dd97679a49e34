use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid specification: {0}")]
    Invalid(String),
    #[error("rate matrix is reducible: no unique stationary distribution")]
    ReducibleRateMatrix,
    #[error("singular ladder exponent matrix; Q+ must be irreducible")]
    SingularExponent,
    #[error("no stationary distribution: {0}")]
    NoStationaryDistribution(String),
    #[error("horizon {horizon} exceeded before passage of level {level}")]
    HorizonExceeded { level: f64, horizon: f64 },
    #[error("moment condition fails: {0}")]
    MomentCondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("simulation stalled: {0}")]
    Stalled(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, MapError>;
