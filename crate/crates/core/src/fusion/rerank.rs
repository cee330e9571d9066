use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::candidate::{sort_by_score_then_id, Candidate};
use crate::corpus::{Corpus, Document};
use crate::dense::HealthResponse;
use crate::error::{Error, Result};
use crate::http::JsonClient;
use crate::lexical::{tokenize, BpeVocab, NormalizationConfig, Tokenizer};

/// A document as handed to a pairwise scorer.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScoredDoc<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

/// Scores (query, document) pairs jointly. One finite score per document, in
/// input order.
pub trait PairScorer: Send + Sync {
    fn fingerprint(&self) -> String;

    fn score(&self, query: &str, docs: &[ScoredDoc<'_>]) -> Result<Vec<f64>>;
}

fn token_set(tokens: Vec<String>) -> HashSet<String> {
    tokens.into_iter().collect()
}

fn overlap(query: &HashSet<String>, doc: &HashSet<String>) -> f64 {
    if query.is_empty() {
        return 0.0;
    }
    query.intersection(doc).count() as f64 / query.len() as f64
}

/// Fraction of distinct query tokens that also occur in the document's text.
pub fn overlap_stub_score(query: &str, doc: &Document, vocab: &BpeVocab, cfg: &NormalizationConfig) -> f64 {
    let q = token_set(tokenize(query, vocab, cfg));
    let d = token_set(tokenize(&doc.text(), vocab, cfg));
    overlap(&q, &d)
}

/// Token-overlap scorer for offline runs.
#[derive(Debug, Clone)]
pub struct OverlapScorer {
    tokenizer: Tokenizer,
}

impl OverlapScorer {
    pub fn new(tokenizer: Tokenizer) -> Self {
        Self { tokenizer }
    }
}

impl PairScorer for OverlapScorer {
    fn fingerprint(&self) -> String {
        format!("overlap-stub:tok={}", self.tokenizer.fingerprint())
    }

    fn score(&self, query: &str, docs: &[ScoredDoc<'_>]) -> Result<Vec<f64>> {
        let q = token_set(self.tokenizer.tokenize(query));
        Ok(docs
            .iter()
            .map(|d| overlap(&q, &token_set(self.tokenizer.tokenize(d.text))))
            .collect())
    }
}

#[derive(Serialize)]
struct RerankRequest<'a> {
    query: &'a str,
    candidates: &'a [ScoredDoc<'a>],
}

#[derive(Deserialize)]
struct RerankResponse {
    scores: Vec<f64>,
    model_fingerprint: String,
}

/// Client for the model server's `POST /rerank`.
#[derive(Debug, Clone)]
pub struct ServiceReranker {
    client: JsonClient,
    batch_size: usize,
    fingerprint: String,
}

impl ServiceReranker {
    pub fn connect(endpoint: &str, batch_size: usize) -> Result<Self> {
        let client = JsonClient::new(endpoint)?;
        let health: HealthResponse = client.get("/health")?;
        let fingerprint = health.rerank_model_fingerprint.ok_or_else(|| Error::Provider {
            endpoint: endpoint.to_string(),
            message: "health response lacks rerank_model_fingerprint".into(),
        })?;
        Ok(Self {
            client,
            batch_size: batch_size.max(1),
            fingerprint,
        })
    }
}

impl PairScorer for ServiceReranker {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn score(&self, query: &str, docs: &[ScoredDoc<'_>]) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(self.batch_size) {
            let resp: RerankResponse = self.client.post(
                "/rerank",
                &RerankRequest {
                    query,
                    candidates: chunk,
                },
            )?;
            if resp.model_fingerprint != self.fingerprint {
                return Err(Error::Provider {
                    endpoint: self.client.base().to_string(),
                    message: format!(
                        "model fingerprint changed from {} to {}",
                        self.fingerprint, resp.model_fingerprint
                    ),
                });
            }
            if resp.scores.len() != chunk.len() {
                return Err(Error::ScoreCount {
                    expected: chunk.len(),
                    actual: resp.scores.len(),
                });
            }
            scores.extend(resp.scores);
        }
        Ok(scores)
    }
}

/// Rescore every candidate from scratch and keep the best `top_n`.
///
/// Branch ranks and scores play no part. Candidates reach the scorer in doc-id
/// order, so the result does not depend on the input order.
pub fn rerank(
    scorer: &dyn PairScorer,
    query_text: &str,
    candidates: &[Candidate],
    corpus: &Corpus,
    top_n: usize,
) -> Result<Vec<(String, f64)>> {
    let mut ids: Vec<&str> = candidates.iter().map(|c| c.doc_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let texts = ids
        .iter()
        .map(|id| {
            corpus
                .get(id)
                .map(Document::text)
                .ok_or_else(|| Error::UnknownDocument(id.to_string()))
        })
        .collect::<Result<Vec<String>>>()?;
    let docs: Vec<ScoredDoc<'_>> = ids
        .iter()
        .zip(&texts)
        .map(|(id, text)| ScoredDoc { id, text })
        .collect();
    let scores = if docs.is_empty() {
        Vec::new()
    } else {
        scorer.score(query_text, &docs)?
    };
    if scores.len() != docs.len() {
        return Err(Error::ScoreCount {
            expected: docs.len(),
            actual: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Provider {
            endpoint: scorer.fingerprint(),
            message: format!("non-finite score for `{}`", ids[i]),
        });
    }
    let mut ranked: Vec<(String, f64)> = ids.into_iter().map(str::to_string).zip(scores).collect();
    sort_by_score_then_id(&mut ranked);
    ranked.truncate(top_n);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::Source;
    use crate::lexical::train_bpe;

    fn corpus() -> Corpus {
        Corpus::new(vec![
            Document::new("a", "vaccine efficacy in mice", ""),
            Document::new("b", "vaccine trial", "mice memory improvement study"),
            Document::new("c", "economic policy", "inflation"),
            Document::new("d", "memory study", "older adults"),
        ])
        .unwrap()
    }

    fn cands(ids: &[&str]) -> Vec<Candidate> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| Candidate::from_branch(*id, Source::Semantic, i + 1, 0.0))
            .collect()
    }

    fn stub() -> OverlapScorer {
        OverlapScorer::new(Tokenizer::Whitespace(NormalizationConfig::default()))
    }

    #[test]
    fn full_overlap_doc_wins() {
        let out = rerank(&stub(), "Mice memory study!", &cands(&["a", "b", "c", "d"]), &corpus(), 5).unwrap();
        assert_eq!(out[0], ("b".to_string(), 1.0));
        assert_eq!(out.len(), 4);
        // d: memory, study -> 2/3; a: mice -> 1/3
        assert_eq!(out[1].0, "d");
        assert_eq!(out[2].0, "a");
    }

    #[test]
    fn single_candidate_and_truncation() {
        let out = rerank(&stub(), "anything", &cands(&["c"]), &corpus(), 5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, "c");
        let out = rerank(&stub(), "vaccine", &cands(&["a", "b", "c"]), &corpus(), 5).unwrap();
        assert_eq!(out.len(), 3);
        let out = rerank(&stub(), "vaccine", &cands(&["a", "b", "c", "d"]), &corpus(), 2).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn unknown_candidate_rejected() {
        let err = rerank(&stub(), "q", &cands(&["a", "zz"]), &corpus(), 5).unwrap_err();
        assert!(matches!(err, Error::UnknownDocument(id) if id == "zz"));
    }

    #[test]
    fn input_order_irrelevant() {
        let a = rerank(&stub(), "vaccine mice", &cands(&["a", "b", "c", "d"]), &corpus(), 5).unwrap();
        let b = rerank(&stub(), "vaccine mice", &cands(&["d", "c", "b", "a"]), &corpus(), 5).unwrap();
        assert_eq!(a, b);
    }

    struct Short;

    impl PairScorer for Short {
        fn fingerprint(&self) -> String {
            "short".into()
        }
        fn score(&self, _: &str, docs: &[ScoredDoc<'_>]) -> Result<Vec<f64>> {
            Ok(vec![0.5; docs.len() - 1])
        }
    }

    #[test]
    fn score_count_mismatch() {
        let err = rerank(&Short, "q", &cands(&["a", "b"]), &corpus(), 5).unwrap_err();
        assert!(matches!(err, Error::ScoreCount { expected: 2, actual: 1 }));
    }

    #[test]
    fn overlap_stub_examples() {
        let vocab = train_bpe(&["alpha beta gamma delta alpha beta gamma delta"], 30).unwrap();
        let cfg = NormalizationConfig::default();
        let doc = Document::new("x", "alpha beta", "");
        assert_eq!(overlap_stub_score("alpha beta", &doc, &vocab, &cfg), 1.0);
        assert_eq!(overlap_stub_score("gamma delta", &doc, &vocab, &cfg), 0.0);
        assert_eq!(overlap_stub_score("alpha beta gamma delta", &doc, &vocab, &cfg), 0.5);
        assert_eq!(overlap_stub_score("", &doc, &vocab, &cfg), 0.0);
    }
}
