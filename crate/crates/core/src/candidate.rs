//! Retrieval candidates as they flow from the branches through fusion.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Lexical,
    Semantic,
}

/// Position and score of a document within one branch's ranking. Ranks start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchHit {
    pub rank: usize,
    pub score: f64,
}

/// A retrieved document with its provenance. A source is present exactly when
/// its hit is.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub doc_id: String,
    pub lexical: Option<BranchHit>,
    pub semantic: Option<BranchHit>,
}

impl Candidate {
    pub fn from_branch(doc_id: impl Into<String>, source: Source, rank: usize, score: f64) -> Self {
        debug_assert!(rank >= 1);
        let hit = Some(BranchHit { rank, score });
        let doc_id = doc_id.into();
        match source {
            Source::Lexical => Self {
                doc_id,
                lexical: hit,
                semantic: None,
            },
            Source::Semantic => Self {
                doc_id,
                lexical: None,
                semantic: hit,
            },
        }
    }

    pub fn sources(&self) -> Vec<Source> {
        let mut s = Vec::with_capacity(2);
        if self.lexical.is_some() {
            s.push(Source::Lexical);
        }
        if self.semantic.is_some() {
            s.push(Source::Semantic);
        }
        s
    }

    pub fn hit(&self, source: Source) -> Option<BranchHit> {
        match source {
            Source::Lexical => self.lexical,
            Source::Semantic => self.semantic,
        }
    }
}

/// Descending score order; `-0.0` and `0.0` compare equal.
pub(crate) fn by_score_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.partial_cmp(&a).unwrap_or_else(|| b.total_cmp(&a))
}

/// Sort `(id, score)` pairs by score descending, then id ascending.
pub(crate) fn sort_by_score_then_id<T: AsRef<str>>(items: &mut [(T, f64)]) {
    items.sort_by(|a, b| by_score_desc(a.1, b.1).then_with(|| a.0.as_ref().cmp(b.0.as_ref())));
}

/// Turn a best-first `(id, score)` list into ranked single-source candidates.
pub(crate) fn ranked_candidates<T: Into<String>>(
    items: impl IntoIterator<Item = (T, f64)>,
    source: Source,
) -> Vec<Candidate> {
    items
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| Candidate::from_branch(id, source, i + 1, score))
        .collect()
}
