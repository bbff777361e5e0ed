use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("value {value} is not on the grid 2^-{k}")]
    OffGrid { value: f64, k: u32 },
    #[error("query outside domain: {0}")]
    Domain(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("internal solver error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
