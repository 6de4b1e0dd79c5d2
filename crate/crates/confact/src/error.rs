//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A dataset record failed to parse or violated an invariant at load time.
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    /// The dataset file contained no records.
    #[error("no records in {path}")]
    EmptyDataset { path: String },

    /// Two records share a claim id.
    #[error("duplicate claim_id `{claim_id}` (records {first} and {second})")]
    DuplicateClaimId {
        claim_id: String,
        first: usize,
        second: usize,
    },

    /// A precondition on an operation's input was not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An LLM reply could not be parsed into the expected shape.
    #[error("parse error: {0}")]
    Parse(String),

    /// A generated background was missing every required section.
    #[error("format error: {0}")]
    Format(String),

    /// Every passage for a claim was filtered out before ranking.
    #[error("no admissible evidence for claim `{claim_id}`")]
    NoAdmissibleEvidence { claim_id: String },

    /// Majority vote received no parseable candidates.
    #[error("no votes: every candidate answer was unparseable")]
    NoVotes,

    /// Majority vote tied and the tie policy demands an error.
    #[error("tied vote ({yes} yes / {no} no) under tie policy `error`")]
    TiedVote { yes: usize, no: usize },

    /// Backend transport failure after retries.
    #[error("transport error: {0}")]
    Transport(String),

    /// A replay store had no entry for the request.
    #[error("unrecorded request: digest {digest} not found in replay store")]
    ReplayMiss { digest: String },

    /// A replay store entry is inconsistent with its own request.
    #[error("corrupt replay store {path}: {message}")]
    ReplayStore { path: String, message: String },

    /// Experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Scoring input was inconsistent with the gold dataset.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Curated credibility table failed to load.
    #[error("credibility table {path}, line {line}: {message}")]
    Table {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with claim- or file-level context.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
