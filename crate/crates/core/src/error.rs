use thiserror::Error;

use crate::threads::ThreadId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GcError {
    #[error("out of memory: no space for a block of {requested} words even after a full collection")]
    OutOfMemory { requested: usize },

    #[error("protocol violation: {0}")]
    ProtocolViolation(&'static str),

    #[error("stop-the-world request timed out; threads not paused: {threads:?}")]
    StwTimeout { threads: Vec<ThreadId> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("the heap was left inconsistent by an earlier failed collection")]
    Poisoned,

    #[error("integer {0} does not fit in an immediate")]
    ImmediateOutOfRange(i64),
}

pub type Result<T, E = GcError> = std::result::Result<T, E>;
