use thiserror::Error;

use crate::graph::{NodeId, NodeState};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {id} out of range (graph has {len} nodes)")]
    NodeOutOfRange { id: NodeId, len: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {node} is {state:?}, only Normal nodes can be damaged")]
    NotNormal { node: NodeId, state: NodeState },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("{what} diverged at epoch {epoch} (loss is not finite)")]
    Diverged { what: &'static str, epoch: usize },

    #[error("budget {requested} exceeds the {available} normal nodes")]
    BudgetTooLarge { requested: usize, available: usize },

    #[error("degenerate labels: every sampled node fell into the {0} class")]
    DegenerateLabels(&'static str),

    #[error("mask graph: could only add {achieved} of {requested} {layer} edges")]
    MaskShortfall {
        layer: &'static str,
        requested: usize,
        achieved: usize,
    },

    #[error("report budgets differ: {0} vs {1}")]
    BudgetMismatch(usize, usize),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("bad tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
