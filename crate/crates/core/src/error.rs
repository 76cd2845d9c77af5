use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("harvester demand {demand} W is at or above saturation {saturation} W")]
    InfeasibleDemand { demand: f64, saturation: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sdp(#[from] see_sdp::SdpError),
}

pub type Result<T> = std::result::Result<T, Error>;
