use thiserror::Error;

use crate::tree::NodeId;

/// Failures reported by a language-model backend.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("backend does not support {0}")]
    Capability(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("depth overflow: node {node} is already at max depth {max_depth}")]
    DepthOverflow { node: NodeId, max_depth: usize },
    #[error("expected {expected} bullets per step, got {got}")]
    BulletCount { expected: usize, got: usize },
    #[error("plot action text is empty")]
    EmptyAction,
    #[error("no final-depth evaluation")]
    NoFinalEvaluation,
    #[error("value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("search exhausted: no expandable nodes")]
    SearchExhausted,
    #[error("all roots are sterile")]
    AllRootsSterile,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("corpus contains a single class")]
    SingleClass,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("rubric response rejected: {0}")]
    Rubric(String),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
