use thiserror::Error;

use crate::model::{NodeId, TxId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("transaction {0} is already queued")]
    DuplicateTransaction(TxId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible topology: {0}")]
    Topology(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Configuration problems map to exit code 2 in the CLI.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse(_) | Error::UnknownScenario(_) | Error::Topology(_)
        )
    }
}
