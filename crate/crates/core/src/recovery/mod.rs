//! Checkpointing, error diagnosis and adaptive retry.

mod checkpoint;
mod classify;
mod retry;
mod strategy;

use thiserror::Error;

pub use checkpoint::{
    compress_state, decompress_state, Checkpoint, CheckpointMeta, CheckpointStore,
    CHECKPOINT_WINDOW,
};
pub use classify::{classify, ErrorClass, ErrorKind, LogRules};
pub use retry::{
    retry_loop, AttemptFailure, Clock, Recoverable, RetryOutcome, RetryPolicy, SimulatedClock,
    SystemClock, MAX_RETRIES,
};
pub use strategy::{strategy_for, RecoveryAction, RecoveryStrategy, SolverParams};

/// Stages between intra-phase checkpoints.
pub const CHECKPOINT_INTERVAL: u64 = 10;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("checkpoint {checkpoint} digest mismatch: expected {expected}, got {actual}")]
    DigestMismatch {
        checkpoint: String,
        expected: String,
        actual: String,
    },
    #[error("checkpoint {0} not found")]
    MissingCheckpoint(String),
    #[error("no valid checkpoint")]
    NoValidCheckpoint,
    #[error("cannot encode state: {0}")]
    Encode(String),
    #[error("cannot decode state: {0}")]
    Decode(String),
    #[error("storage exhausted: {0}")]
    ResourceExhaustion(String),
    #[error("bad rule table: {0}")]
    Rules(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
