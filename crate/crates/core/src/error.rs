use thiserror::Error;

use crate::model::{Agent, Node, StrandId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token {0:?}: tokens are nonempty and contain no whitespace")]
    InvalidToken(String),

    #[error("cannot parse {what} from {text:?}")]
    Parse { what: &'static str, text: String },

    #[error("unknown strand {0}")]
    UnknownStrand(StrandId),

    #[error("unknown agent {0}")]
    UnknownAgent(Agent),

    #[error("node {0} is out of range")]
    NodeOutOfRange(Node),

    #[error("malformed strand space: {0}")]
    MalformedSpace(String),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("the space does not use the identity agent assignment")]
    NotIdentityAssignment,

    #[error("history set: {0}")]
    HistorySet(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("run sets range over different agent sets")]
    AgentMismatch,

    #[error("run prefix: {0}")]
    RunShape(String),

    #[error("time {time} is beyond the chain length {len}")]
    TimeOutOfRange { time: usize, len: usize },

    #[error("enumeration exceeded the state limit of {limit}")]
    StateLimit { limit: usize },

    #[error("document: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
