use std::path::PathBuf;

use crate::decision::{Decision, Scheme};
use crate::model::Node;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("nodes {0:?} and {1:?} are coincident")]
    CoincidentNodes(Node, Node),

    #[error("decision {decision:?} cannot occur under {scheme:?}")]
    SchemeMismatch { decision: Decision, scheme: Scheme },

    #[error("decision probabilities sum to {0}, expected 1")]
    WeightsNotNormalized(f64),

    #[error("Monte Carlo run needs at least one trial")]
    ZeroTrials,

    #[error("only {accepted} draws fell in the conditioning event, need {required}")]
    InsufficientConditioning { accepted: u64, required: u64 },

    #[error("could not start worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),

    #[error("config {path}:{line}: {reason}")]
    Config {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("could not access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
