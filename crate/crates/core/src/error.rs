use thiserror::Error;

use crate::fractal::AnalysisError;
use crate::initial_data::DataError;
use crate::nls::SolverError;
use crate::spectral::SpectralError;
use crate::verification::ScanError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for pipelines that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] Box<SolverError>),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("invalid time: {0}")]
    Time(String),
}

impl From<SolverError> for Error {
    fn from(e: SolverError) -> Self {
        Error::Solver(Box::new(e))
    }
}
