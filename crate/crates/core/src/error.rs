use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} is out of range for a graph with {d} nodes (labels are 1-based)")]
    InvalidNode { node: usize, d: usize },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),

    #[error("edge set contains a directed cycle")]
    Cycle,

    #[error("node arguments must be distinct: {0}")]
    OverlappingNodes(String),

    #[error("path enumeration exceeded the cap of {cap} paths")]
    PathCapExceeded { cap: usize },

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("row {0} has zero norm")]
    ZeroRow(usize),

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("threshold count k = {k} must lie in [1, {n}]")]
    ThresholdOutOfRange { k: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("identified set {0:?} is not closed under ancestors")]
    NotAncestrallyClosed(Vec<usize>),

    #[error("not a permutation of 1..={0}")]
    NotPermutation(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
