use crate::topo_graph::NodeId;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("deterministic edge {0}-{1} must connect two GV nodes")]
    DeterministicNonGv(NodeId, NodeId),
    #[error("edge {0}-{1} has non-positive length")]
    DegenerateEdge(NodeId, NodeId),
    #[error("snapshot line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("center node {0} is not in the graph")]
    MissingCenter(NodeId),
    #[error("center node {0} appears more than once")]
    DuplicateCenter(NodeId),
    #[error("weight table is {rows}x{cols}, expected {n}x{n}")]
    WeightShape { rows: usize, cols: usize, n: usize },
    #[error("center index {0} out of range")]
    BadCenter(usize),
    #[error("node {0} is not a leaf of the load tree of center {1}")]
    NotALeaf(NodeId, usize),
    #[error("node {0} is not in the partition of center {1}")]
    NotInPartition(NodeId, usize),
    #[error("weights w[{0}][{1}] and w[{1}][{0}] are not antisymmetric")]
    NotAntisymmetric(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter {name}: {msg}")]
    Invalid { name: &'static str, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("payload truncated")]
    Truncated,
    #[error("bad magic or unsupported version {0}")]
    Version(u8),
    #[error("unknown record tag {0}")]
    Tag(u8),
    #[error("malformed payload: {0}")]
    Malformed(String),
}
