use thiserror::Error;

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::numeric::NumericError;
use crate::prospect::ProspectError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Prospect(#[from] ProspectError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("model is not a Markov chain (state '{0}' has several actions)")]
    NotMarkovChain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point is not achievable: {0}")]
    InfeasiblePoint(String),
    #[error("strategy scope does not match the model")]
    ScopeMismatch,
    #[error("optimizer budget exceeded: {0}")]
    Budget(String),
}

impl Error {
    /// True for errors caused by the input rather than by the solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Prospect(_) | Error::Model(_) | Error::NotMarkovChain(_) | Error::InvalidInput(_) | Error::ScopeMismatch
        )
    }
}
