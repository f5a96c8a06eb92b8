use thiserror::Error;

use crate::core::{DocId, QueryId};

/// Errors reported by library operations.
///
/// Contract violations (empty needle, out-of-range alpha, dimension
/// mismatches) are panics, not variants here: they indicate caller bugs,
/// not runtime conditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("document not found in corpus: {id}")]
    DocNotFound { id: DocId },

    #[error("document {doc_id} has no recorded trials for query {query_id}")]
    UntriedDocument { query_id: QueryId, doc_id: DocId },

    #[error("{agent} update aborted: gradient contains a non-finite component")]
    NonFiniteGradient { agent: &'static str },

    #[error("generation failed: no answer candidates could be built")]
    NoCandidates,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic task spec: {0}")]
    InvalidSynthSpec(String),

    #[error("checkpoint incompatible: {0}")]
    CheckpointMismatch(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
