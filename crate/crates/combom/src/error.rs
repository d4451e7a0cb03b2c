//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty observation log")]
    EmptyLog,

    #[error("empty Pareto front")]
    EmptyFront,

    #[error("empty validation set")]
    EmptyValidationSet,

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration cap exceeded: m = {m} > 16")]
    EnumerationCap { m: usize },

    #[error("budget below population size: budget {budget} < population {population}")]
    BudgetBelowPopulation { budget: usize, population: usize },

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("prompt has {got} options; at most 10 are supported")]
    TooManyOptions { got: usize },

    #[error("replay cache miss for key {key}")]
    ReplayMiss { key: String },

    #[error("endpoint request failed after {attempts} attempts: {detail}")]
    EndpointExhausted { attempts: u32, detail: String },

    #[error("evaluation failed for instance {query_id}: {detail}")]
    EvalFailure { query_id: String, detail: String },

    #[error("invalid dataset record at line {line}: {detail}")]
    Dataset { line: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("resume rejected: {0}")]
    Resume(String),

    #[error("campaign halted at iteration {iteration}; state saved to {state_path}: {source}")]
    Halted {
        iteration: u64,
        state_path: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
