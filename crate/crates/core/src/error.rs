use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix logarithm branch violated: {0}")]
    BranchError(String),
    #[error("step too large: {0}")]
    StepTooLarge(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical error: {0}")]
    NumericalError(String),
    #[error("method is not Schur stable: {0}")]
    Unstable(String),
    #[error("outside domain: {0}")]
    OutOfDomain(String),
    #[error("degenerate stationary point: |theta''| = {0:e}")]
    DegenerateStationaryPoint(f64),
    #[error("point is not on a Stokes wall: {0}")]
    NotAWall(String),
    #[error("pole at wall: {0}")]
    PoleAtWall(String),
    #[error("degenerate switch: {0}")]
    DegenerateSwitch(String),
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("separation oracle contract violated: {0}")]
    OracleContractViolation(String),
    #[error("not converged after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

impl Error {
    /// Stable machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::BranchError(_) => "BranchError",
            Error::StepTooLarge(_) => "StepTooLarge",
            Error::Unsupported(_) => "Unsupported",
            Error::NumericalError(_) => "NumericalError",
            Error::Unstable(_) => "Unstable",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::DegenerateStationaryPoint(_) => "DegenerateStationaryPoint",
            Error::NotAWall(_) => "NotAWall",
            Error::PoleAtWall(_) => "PoleAtWall",
            Error::DegenerateSwitch(_) => "DegenerateSwitch",
            Error::NotSpd => "NotSPD",
            Error::OracleContractViolation(_) => "OracleContractViolation",
            Error::NotConverged { .. } => "NotConverged",
        }
    }
}
