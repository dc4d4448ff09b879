//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Snapshot text could not be parsed.
    #[error("snapshot parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A loaded or constructed value violates a data-model invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A generator or strategy was configured inconsistently.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A migration plan no longer matches the snapshot it is applied to.
    #[error("stale migration plan: object {object} is not on node {expected_node}")]
    StalePlan { object: usize, expected_node: usize },

    /// A strategy failed mid-simulation.
    #[error("load balancing round {round} (step {step}) failed: {source}")]
    Round {
        round: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
