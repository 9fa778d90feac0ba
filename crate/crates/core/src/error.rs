use thiserror::Error;

use crate::config::ConfigError;
use crate::counterfactual::CounterfactualError;
use crate::econometrics::EstimationError;
use crate::graph::GraphError;
use crate::ingest::IngestError;
use crate::leontief::LeontiefError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error wrapping each module's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Leontief(#[from] LeontiefError),
    #[error(transparent)]
    Counterfactual(#[from] CounterfactualError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

impl Error {
    /// Short machine-parseable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Ingest(e) => e.category(),
            Error::Graph(_) => "graph",
            Error::Leontief(_) => "solver",
            Error::Counterfactual(_) => "counterfactual",
            Error::Estimation(_) => "estimation",
        }
    }
}
