use thiserror::Error;

use crate::bn::BnError;
use crate::data::DataError;
use crate::graph::GraphError;

/// Errors raised by the learning and evaluation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bn(#[from] BnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("record {record} has probability zero under the current network")]
    ZeroProbabilityRecord { record: usize },
    #[error("bootstrap {index} failed: {source}")]
    Bootstrap { index: usize, source: Box<Error> },
    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the failure is numeric (zero-probability evidence) rather than
    /// a malformed input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::ZeroProbabilityRecord { .. } => true,
            Error::Bn(BnError::ZeroProbabilityEvidence) => true,
            Error::Data(DataError::Bn(BnError::ZeroProbabilityEvidence)) => true,
            Error::Bootstrap { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
