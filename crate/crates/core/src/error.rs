use std::path::PathBuf;

use crate::graph::NodeId;

/// Errors raised by the compression toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite weight at {entry}: {value}")]
    NonFiniteWeight { entry: String, value: f64 },
    #[error("invalid coupling ({i}, {j}): {reason}")]
    InvalidCoupling { i: NodeId, j: NodeId, reason: &'static str },
    #[error("edge ({0}, {1}) does not exist")]
    MissingEdge(NodeId, NodeId),
    #[error("cannot contract ({kept}, {removed}): {reason}")]
    InvalidContraction {
        kept: NodeId,
        removed: NodeId,
        reason: &'static str,
    },
    #[error("spin assignment: {0}")]
    Assignment(String),
    #[error("{spins} free spins exceeds the enumeration cap of {cap}; use the simulated annealing solver instead")]
    EnumerationCap { spins: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch in {layer}: expected {expected}, got {got}")]
    Dimension { layer: String, expected: usize, got: usize },
    #[error("non-finite gradient in parameter block {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("instance {id}: {source}")]
    Instance {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_instance(self, id: impl Into<String>) -> Self {
        Error::Instance {
            id: id.into(),
            source: Box::new(self),
        }
    }
}
