use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("variable {0} does not belong to this problem")]
    UnknownVariable(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}
