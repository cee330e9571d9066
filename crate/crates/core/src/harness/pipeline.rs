//! End-to-end retrieval: lexical and semantic branches, candidate merging,
//! then re-ranking or reciprocal rank fusion.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::config::{
    EmbeddingMode, FusionMode, GeneratorMode, RerankerMode, RunConfig, Stage, TokenizerKind,
};
use super::metrics::{gold_rank, reciprocal_rank_at_k};
use crate::augment::{
    augment_corpus, expand_query, hyde_document, rewrite_query, CachedGenerator, CannedGenerator,
    QueryAugmentation, ServiceGenerator, TextGenerator,
};
use crate::candidate::Candidate;
use crate::corpus::{Corpus, Query, QuerySet};
use crate::dense::{
    embed, EmbedItem, EmbeddingProvider, EmbeddingVector, FileEmbeddings, HashEmbedder, Role,
    ServiceEmbedder, VectorStore,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::{merge_candidates, rerank, rrf_fuse, OverlapScorer, PairScorer, ServiceReranker};
use crate::http::MODEL_SERVER_ENV;
use crate::lexical::{normalize_text, train_bpe, BpeVocab, InvertedIndex, Tokenizer};

/// File names inside an index directory.
pub const MERGES_FILE: &str = "bpe.merges";
pub const LEXICAL_INDEX_FILE: &str = "lexical.idx";
pub const VECTORS_FILE: &str = "documents.emb";

fn endpoint(explicit: &Option<String>, what: &str) -> Result<String> {
    explicit
        .clone()
        .or_else(|| std::env::var(MODEL_SERVER_ENV).ok())
        .ok_or_else(|| Error::Config(format!("{what} needs an endpoint (or {MODEL_SERVER_ENV})")))
}

/// Train the lexical tokenizer a config asks for on the corpus documents.
pub fn build_tokenizer(cfg: &RunConfig, corpus: &Corpus) -> Result<Tokenizer> {
    let norm = cfg.effective_normalization();
    match cfg.lexical.tokenizer {
        TokenizerKind::Whitespace => Ok(Tokenizer::Whitespace(norm)),
        TokenizerKind::Bpe => {
            let texts: Vec<String> = corpus
                .documents()
                .iter()
                .map(|d| normalize_text(&d.text(), &norm))
                .collect();
            let vocab = train_bpe(&texts, cfg.lexical.vocab_size)?;
            log::info!(
                "trained BPE: {} merges, {} symbols",
                vocab.merges().len(),
                vocab.vocab_size()
            );
            Ok(Tokenizer::bpe(vocab, norm))
        }
    }
}

pub fn embedding_provider(cfg: &RunConfig, tokenizer: &Tokenizer) -> Result<Box<dyn EmbeddingProvider>> {
    let d = &cfg.dense;
    Ok(match d.provider {
        EmbeddingMode::Hash => Box::new(HashEmbedder::new(d.dim, tokenizer.clone())?),
        EmbeddingMode::File => {
            let f = FileEmbeddings::open_many(&d.vectors)?;
            if f.dim() != d.dim {
                return Err(Error::DimensionMismatch {
                    expected: d.dim,
                    actual: f.dim(),
                });
            }
            Box::new(f)
        }
        EmbeddingMode::Service => Box::new(ServiceEmbedder::connect(
            &endpoint(&d.endpoint, "service embedding")?,
            d.dim,
            d.batch_size,
        )?),
    })
}

pub fn pair_scorer(cfg: &RunConfig, tokenizer: &Tokenizer) -> Result<Box<dyn PairScorer>> {
    let f = &cfg.fusion;
    Ok(match f.reranker {
        RerankerMode::OverlapStub => Box::new(OverlapScorer::new(tokenizer.clone())),
        RerankerMode::Service => Box::new(ServiceReranker::connect(
            &endpoint(&f.rerank_endpoint, "service re-ranking")?,
            f.rerank_batch_size,
        )?),
    })
}

pub fn text_generator(cfg: &RunConfig) -> Result<Box<dyn TextGenerator>> {
    let a = &cfg.augment;
    Ok(match a.generator {
        GeneratorMode::Canned => {
            let path = a
                .fixture
                .as_ref()
                .ok_or_else(|| Error::Config("canned generation needs augment.fixture".into()))?;
            Box::new(CachedGenerator::new(CannedGenerator::open(path)?))
        }
        GeneratorMode::Service => {
            let ep = endpoint(&a.endpoint, "service generation")?;
            Box::new(CachedGenerator::new(ServiceGenerator::new(&ep)?))
        }
    })
}

/// Components shared across runs that only differ downstream of them.
#[derive(Clone)]
pub struct EngineParts {
    pub tokenizer: Tokenizer,
    pub index: Option<Arc<InvertedIndex>>,
    pub embedder: Option<Arc<dyn EmbeddingProvider>>,
    pub store: Option<Arc<VectorStore>>,
}

/// A configured pipeline over one corpus.
pub struct Engine<'c> {
    cfg: RunConfig,
    corpus: &'c Corpus,
    tokenizer: Tokenizer,
    index: Option<Arc<InvertedIndex>>,
    embedder: Option<Arc<dyn EmbeddingProvider>>,
    store: Option<Arc<VectorStore>>,
    scorer: Option<Box<dyn PairScorer>>,
    generator: Option<Box<dyn TextGenerator>>,
    exec: Execution,
}

/// Retrieval output for one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub query_id: String,
    /// Final ranking, best first.
    pub ranked: Vec<(String, f64)>,
    /// Branch outputs (ids in rank order) when the stage ran them.
    pub lexical: Vec<String>,
    pub semantic: Vec<String>,
    /// Merged candidate ids (full pipeline only).
    pub merged: Vec<String>,
}

impl QueryResult {
    pub fn ids(&self) -> Vec<String> {
        self.ranked.iter().map(|(id, _)| id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerQuery {
    pub query_id: String,
    pub gold_rank: Option<usize>,
    pub reciprocal_rank: f64,
}

/// Fraction of queries whose gold made it into each candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateRecall {
    pub lexical: f64,
    pub semantic: f64,
    pub merged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_query: Vec<PerQuery>,
    pub mrr: BTreeMap<usize, f64>,
    /// Gold-in-top-k rate (Precision@k in single-gold terms).
    pub success: BTreeMap<usize, f64>,
    /// Length of the ranked lists that were evaluated.
    pub depth: usize,
    pub candidate_recall: Option<CandidateRecall>,
    pub config_fingerprint: String,
    pub embedding_fingerprint: Option<String>,
    pub scorer_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub results: Vec<QueryResult>,
    pub report: Option<EvalReport>,
}

impl<'c> Engine<'c> {
    /// Build every component the config needs from scratch.
    pub fn build(cfg: RunConfig, corpus: &'c Corpus, exec: Execution) -> Result<Self> {
        cfg.validate()?;
        let tokenizer = build_tokenizer(&cfg, corpus)?;
        let parts = Self::build_parts(&cfg, corpus, tokenizer, exec)?;
        Self::from_parts(cfg, corpus, parts, exec)
    }

    pub fn build_parts(cfg: &RunConfig, corpus: &Corpus, tokenizer: Tokenizer, exec: Execution) -> Result<EngineParts> {
        let index = if cfg.needs_lexical() {
            Some(Arc::new(InvertedIndex::build(corpus, &tokenizer, cfg.lexical.bm25(), exec)?))
        } else {
            None
        };
        let (embedder, store) = if cfg.needs_dense() {
            let embedder: Arc<dyn EmbeddingProvider> = embedding_provider(cfg, &tokenizer)?.into();
            let store = VectorStore::build(corpus, embedder.as_ref(), exec, cfg.dense.batch_size)?;
            (Some(embedder), Some(Arc::new(store)))
        } else {
            (None, None)
        };
        Ok(EngineParts {
            tokenizer,
            index,
            embedder,
            store,
        })
    }

    /// Load whatever an index directory holds and build the rest.
    pub fn from_index_dir(cfg: RunConfig, corpus: &'c Corpus, dir: &Path, exec: Execution) -> Result<Self> {
        cfg.validate()?;
        let norm = cfg.effective_normalization();
        let merges = dir.join(MERGES_FILE);
        let tokenizer = match cfg.lexical.tokenizer {
            TokenizerKind::Bpe if merges.exists() => Tokenizer::bpe(BpeVocab::load(&merges)?, norm),
            _ => build_tokenizer(&cfg, corpus)?,
        };
        let idx_path = dir.join(LEXICAL_INDEX_FILE);
        let index = if !cfg.needs_lexical() {
            None
        } else if idx_path.exists() {
            let idx = InvertedIndex::load(&idx_path, &tokenizer)?;
            if idx.corpus_fingerprint() != corpus.fingerprint() {
                return Err(Error::Format(format!(
                    "{} was built from a different corpus",
                    idx_path.display()
                )));
            }
            if idx.params() != cfg.lexical.bm25() {
                return Err(Error::Config(format!(
                    "{} was built with k1={} b={}, config asks for k1={} b={}",
                    idx_path.display(),
                    idx.params().k1,
                    idx.params().b,
                    cfg.lexical.k1,
                    cfg.lexical.b
                )));
            }
            Some(Arc::new(idx))
        } else {
            Some(Arc::new(InvertedIndex::build(corpus, &tokenizer, cfg.lexical.bm25(), exec)?))
        };
        let vec_path = dir.join(VECTORS_FILE);
        let (embedder, store) = if !cfg.needs_dense() {
            (None, None)
        } else {
            let embedder: Arc<dyn EmbeddingProvider> = embedding_provider(&cfg, &tokenizer)?.into();
            let store = if vec_path.exists() {
                let s = VectorStore::load(&vec_path)?;
                s.check_covers(corpus)?;
                if s.provider_fingerprint() != embedder.fingerprint() {
                    return Err(Error::Config(format!(
                        "{} holds vectors from `{}`, but the query embedder is `{}`",
                        vec_path.display(),
                        s.provider_fingerprint(),
                        embedder.fingerprint()
                    )));
                }
                s
            } else {
                VectorStore::build(corpus, embedder.as_ref(), exec, cfg.dense.batch_size)?
            };
            (Some(embedder), Some(Arc::new(store)))
        };
        let parts = EngineParts {
            tokenizer,
            index,
            embedder,
            store,
        };
        Self::from_parts(cfg, corpus, parts, exec)
    }

    pub fn from_parts(cfg: RunConfig, corpus: &'c Corpus, parts: EngineParts, exec: Execution) -> Result<Self> {
        cfg.validate()?;
        let scorer = if cfg.stage == Stage::Full && cfg.fusion.mode == FusionMode::Rerank {
            Some(pair_scorer(&cfg, &parts.tokenizer)?)
        } else {
            None
        };
        let generator = if cfg.augment.enabled() {
            Some(text_generator(&cfg)?)
        } else {
            None
        };
        let mut engine = Self {
            cfg,
            corpus,
            tokenizer: parts.tokenizer,
            index: parts.index,
            embedder: parts.embedder,
            store: parts.store,
            scorer,
            generator,
            exec,
        };
        if engine.cfg.augment.ad && engine.cfg.needs_dense() {
            engine.add_document_variants()?;
        }
        Ok(engine)
    }

    /// Embed a generated summary and synthetic post per document as extra rows.
    fn add_document_variants(&mut self) -> Result<()> {
        let gen = self.generator.as_deref().expect("generator present when augmenting");
        let embedder = self.embedder.as_deref().expect("embedder present for dense stages");
        let docs = self.corpus.documents();
        let variants = self.exec.try_map(docs, |d| augment_corpus(gen, d))?;
        let ids: Vec<[String; 2]> = variants
            .iter()
            .map(|v| [format!("{}::summary", v.doc_id), format!("{}::tweet", v.doc_id)])
            .collect();
        let items: Vec<EmbedItem<'_>> = variants
            .iter()
            .zip(&ids)
            .flat_map(|(v, ids)| {
                [
                    EmbedItem { id: &ids[0], text: &v.summary },
                    EmbedItem { id: &ids[1], text: &v.synthetic_tweet },
                ]
            })
            .collect();
        let chunks: Vec<&[EmbedItem<'_>]> = items.chunks(self.cfg.dense.batch_size.max(1)).collect();
        let vectors = self.exec.try_map(&chunks, |c| embed(embedder, c, Role::Document))?;
        let store = Arc::make_mut(self.store.as_mut().expect("store present for dense stages"));
        for (v, item) in vectors.into_iter().flatten().zip(&items) {
            let doc_id = item.id.rsplit_once("::").map(|(d, _)| d).unwrap_or(item.id);
            store.push_variant(doc_id, v)?;
        }
        log::info!("vector store now holds {} rows for {} documents", store.num_rows(), store.num_docs());
        Ok(())
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn index(&self) -> Option<&InvertedIndex> {
        self.index.as_deref()
    }

    pub fn store(&self) -> Option<&VectorStore> {
        self.store.as_deref()
    }

    fn lexical_query(&self, q: &Query) -> Result<String> {
        let gen = self.generator.as_deref();
        Ok(match (self.cfg.augment.query, gen) {
            (QueryAugmentation::Rewrite, Some(g)) => rewrite_query(g, &q.text)?,
            (QueryAugmentation::Expand, Some(g)) => expand_query(g, &q.text)?,
            _ => q.text.clone(),
        })
    }

    fn semantic_query(&self, q: &Query) -> Result<(String, String)> {
        match (self.cfg.augment.hyde, self.generator.as_deref()) {
            (true, Some(g)) => Ok((format!("{}::hyde", q.query_id), hyde_document(g, &q.text)?.text())),
            _ => Ok((q.query_id.clone(), q.text.clone())),
        }
    }

    fn with_query_id<T>(id: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| Error::Query {
            id: id.to_string(),
            source: Box::new(e),
        })
    }

    fn query_vectors(&self, queries: &[Query]) -> Result<Vec<EmbeddingVector>> {
        let embedder = self.embedder.as_deref().expect("embedder present for dense stages");
        let texts = self.exec.try_map(queries, |q| {
            Self::with_query_id(&q.query_id, self.semantic_query(q))
        })?;
        let batch = self.cfg.dense.batch_size.max(1);
        let chunks: Vec<(usize, &[(String, String)])> = texts
            .chunks(batch)
            .enumerate()
            .map(|(i, c)| (i * batch, c))
            .collect();
        let vectors = self.exec.try_map(&chunks, |(start, c)| {
            let items: Vec<EmbedItem<'_>> = c
                .iter()
                .map(|(id, text)| EmbedItem { id, text })
                .collect();
            Self::with_query_id(&queries[*start].query_id, embed(embedder, &items, Role::Query))
        })?;
        Ok(vectors.into_iter().flatten().collect())
    }

    fn run_one(&self, q: &Query, qvec: Option<&EmbeddingVector>) -> Result<QueryResult> {
        let ids = |c: &[Candidate]| c.iter().map(|c| c.doc_id.clone()).collect::<Vec<_>>();
        let lexical = match &self.index {
            Some(idx) => idx.search(&self.lexical_query(q)?, self.cfg.lexical.k),
            None => Vec::new(),
        };
        let semantic = match (&self.store, qvec) {
            (Some(store), Some(v)) => store.search(v, self.cfg.dense.k, Execution::Sequential)?,
            _ => Vec::new(),
        };
        let branch_scores = |c: &[Candidate]| -> Vec<(String, f64)> {
            c.iter()
                .map(|c| {
                    let hit = c.lexical.or(c.semantic).expect("branch candidate has a hit");
                    (c.doc_id.clone(), hit.score)
                })
                .collect()
        };
        let (ranked, merged) = match self.cfg.stage {
            Stage::Lexical => (branch_scores(&lexical), Vec::new()),
            Stage::Semantic => (branch_scores(&semantic), Vec::new()),
            Stage::Full => {
                let merged = merge_candidates(&lexical, &semantic)?;
                let ranked = match self.cfg.fusion.mode {
                    FusionMode::Rerank => {
                        let scorer = self.scorer.as_deref().expect("scorer present for re-ranking");
                        rerank(scorer, &q.text, &merged, self.corpus, self.cfg.fusion.top_n)?
                    }
                    FusionMode::Rrf => {
                        let mut fused = rrf_fuse(&[ids(&lexical), ids(&semantic)], &self.cfg.fusion.rrf());
                        fused.truncate(self.cfg.fusion.top_n);
                        fused
                    }
                };
                (ranked, ids(&merged))
            }
        };
        Ok(QueryResult {
            query_id: q.query_id.clone(),
            ranked,
            lexical: ids(&lexical),
            semantic: ids(&semantic),
            merged,
        })
    }

    /// Retrieve for every query, in input order. The first failing query aborts
    /// the run.
    pub fn search(&self, queries: &[Query]) -> Result<Vec<QueryResult>> {
        let vectors = if self.cfg.needs_dense() {
            Some(self.query_vectors(queries)?)
        } else {
            None
        };
        let indexed: Vec<(usize, &Query)> = queries.iter().enumerate().collect();
        self.exec.try_map(&indexed, |(i, q)| {
            let v = vectors.as_ref().map(|vs| &vs[*i]);
            Self::with_query_id(&q.query_id, self.run_one(q, v))
        })
    }

    /// Search, then evaluate when the query set carries gold ids.
    pub fn run(&self, queries: &QuerySet) -> Result<RunOutput> {
        let results = self.search(&queries.queries)?;
        let report = if queries.has_gold {
            Some(self.evaluate(&queries.queries, &results)?)
        } else {
            None
        };
        Ok(RunOutput { results, report })
    }

    pub fn evaluate(&self, queries: &[Query], results: &[QueryResult]) -> Result<EvalReport> {
        let mut report = evaluate_results(&self.cfg, queries, results)?;
        for q in queries {
            let gold = q.gold_doc_id.as_deref().ok_or(Error::MissingGold)?;
            if self.corpus.position(gold).is_none() {
                return Err(Error::Query {
                    id: q.query_id.clone(),
                    source: Box::new(Error::UnknownDocument(gold.to_string())),
                });
            }
        }
        report.embedding_fingerprint = self.embedder.as_ref().map(|e| e.fingerprint());
        report.scorer_fingerprint = self.scorer.as_ref().map(|s| s.fingerprint());
        Ok(report)
    }
}

fn recall(results: &[QueryResult], golds: &[&str], pool: impl Fn(&QueryResult) -> &[String]) -> f64 {
    let hits = results
        .iter()
        .zip(golds)
        .filter(|(r, g)| pool(r).iter().any(|d| d == *g))
        .count();
    hits as f64 / results.len().max(1) as f64
}

/// Metrics over finished results. Every query needs a gold id.
pub fn evaluate_results(cfg: &RunConfig, queries: &[Query], results: &[QueryResult]) -> Result<EvalReport> {
    if queries.len() != results.len() {
        return Err(Error::Config(format!(
            "{} results for {} queries",
            results.len(),
            queries.len()
        )));
    }
    let golds: Vec<&str> = queries
        .iter()
        .map(|q| q.gold_doc_id.as_deref().ok_or(Error::MissingGold))
        .collect::<Result<_>>()?;
    let lists: Vec<Vec<String>> = results.iter().map(QueryResult::ids).collect();
    let primary = if cfg.eval.cutoffs.contains(&5) { 5 } else { cfg.eval.cutoffs[0] };
    let per_query = results
        .iter()
        .zip(&lists)
        .zip(&golds)
        .map(|((r, list), g)| PerQuery {
            query_id: r.query_id.clone(),
            gold_rank: gold_rank(list, g),
            reciprocal_rank: reciprocal_rank_at_k(list, g, primary),
        })
        .collect();
    let gold_opts: Vec<Option<&str>> = golds.iter().map(|g| Some(*g)).collect();
    let mut mrr = BTreeMap::new();
    let mut success = BTreeMap::new();
    for &k in &cfg.eval.cutoffs {
        mrr.insert(k, super::metrics::mrr_at_k(&lists, &gold_opts, k)?);
        success.insert(k, super::metrics::success_at_k(&lists, &gold_opts, k)?);
    }
    let candidate_recall = (cfg.stage == Stage::Full).then(|| CandidateRecall {
        lexical: recall(results, &golds, |r| &r.lexical),
        semantic: recall(results, &golds, |r| &r.semantic),
        merged: recall(results, &golds, |r| &r.merged),
    });
    if let Some(c) = candidate_recall {
        debug_assert!(c.merged >= c.lexical.max(c.semantic));
    }
    Ok(EvalReport {
        per_query,
        mrr,
        success,
        depth: cfg.depth(),
        candidate_recall,
        config_fingerprint: cfg.fingerprint(),
        embedding_fingerprint: None,
        scorer_fingerprint: None,
    })
}

/// Build an engine from `cfg` and run it over `queries`.
pub fn run_pipeline(cfg: &RunConfig, corpus: &Corpus, queries: &QuerySet) -> Result<RunOutput> {
    Engine::build(cfg.clone(), corpus, Execution::available())?.run(queries)
}
