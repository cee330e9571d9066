use std::path::PathBuf;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Provider,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown document id `{0}`")]
    UnknownDocument(String),
    #[error("query set has no gold ids; it cannot be evaluated")]
    MissingGold,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("vocab size {vocab_size} must exceed the base alphabet size {alphabet}")]
    VocabTooSmall { vocab_size: usize, alphabet: usize },
    #[error("document position {0} out of range")]
    InvalidDocument(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite embedding value for `{0}`")]
    NonFinite(String),
    #[error("embedding for `{id}` has norm {norm}, too far from 1")]
    BadNorm { id: String, norm: f64 },
    #[error("no precomputed vector for `{0}`")]
    MissingVector(String),
    #[error("unsupported format: {0}")]
    Format(String),
    #[error("provider request to {endpoint} failed: {message}")]
    Provider { endpoint: String, message: String },
    #[error("scorer returned {actual} scores for {expected} candidates")]
    ScoreCount { expected: usize, actual: usize },
    #[error("generator returned empty output for template `{0}`")]
    EmptyGeneration(String),
    #[error("could not parse generator output: {reason}; raw output: {raw:?}")]
    GenerationParse { reason: String, raw: String },
    #[error("no canned generation for template `{template}` with input hash {hash}")]
    MissingFixture { template: String, hash: String },
    #[error("query `{id}` failed: {source}")]
    Query {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("nothing to write: empty results")]
    EmptyResults,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::VocabTooSmall { .. } => ErrorClass::Usage,
            Error::Provider { .. }
            | Error::ScoreCount { .. }
            | Error::EmptyGeneration(_)
            | Error::GenerationParse { .. }
            | Error::MissingFixture { .. } => ErrorClass::Provider,
            Error::Query { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
