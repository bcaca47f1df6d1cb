use thiserror::Error;

/// Errors raised across graph queries, predictor construction and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// The graph itself violates a structural invariant (cycle, duplicate edge, ...).
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A query referenced unknown nodes or an inadmissible conditioning set.
    #[error("query error: {0}")]
    Query(String),

    /// A predictor spec or surgery request is inconsistent with the graph.
    #[error("spec error: {0}")]
    Spec(String),

    /// The request is well formed but falls outside what is supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("capacity exceeded: {what} needs {needed}, limit is {limit}")]
    Capacity {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    /// Some unstable edge points into the target, so no stable distribution exists.
    #[error("no stable distribution exists: {0}")]
    NoStableSolution(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
