//! Hybrid retrieval of scientific sources for social-media posts: BM25 over a
//! trained subword vocabulary, exact dense search, candidate merging and
//! re-ranking or reciprocal rank fusion, plus an evaluation harness.

pub mod augment;
pub mod candidate;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod exec;
pub mod fingerprint;
pub mod fusion;
pub mod harness;
pub mod http;
pub mod lexical;

pub use candidate::{BranchHit, Candidate, Source};
pub use corpus::{load_corpus, load_queries, Corpus, Document, Format, Query, QuerySet};
pub use error::{Error, ErrorClass, Result};
pub use exec::Execution;
