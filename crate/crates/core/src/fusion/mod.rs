//! Candidate merging, re-ranking and reciprocal rank fusion.

pub mod merge;
pub mod rerank;
pub mod rrf;

pub use crate::candidate::{BranchHit, Candidate, Source};
pub use merge::merge_candidates;
pub use rerank::{overlap_stub_score, rerank, OverlapScorer, PairScorer, ScoredDoc, ServiceReranker};
pub use rrf::{rrf_fuse, RrfParams};
