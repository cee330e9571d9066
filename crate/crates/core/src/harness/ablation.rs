//! Grid runner: one evaluated configuration per row, in declared order, with
//! tokenizers, indexes and vector stores shared between rows that agree on
//! them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{merge_toml, EmbeddingMode, RunConfig, TokenizerKind};
use super::pipeline::{build_tokenizer, embedding_provider, Engine, EngineParts, EvalReport};
use crate::corpus::{Corpus, QuerySet};
use crate::dense::{EmbeddingProvider, VectorStore};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lexical::{InvertedIndex, Tokenizer};

/// Columns of the ablation table: (metric, cutoff).
pub const TABLE_COLUMNS: [(&str, usize); 4] = [("MRR", 1), ("MRR", 5), ("Success", 30), ("Success", 100)];

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub label: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub report: EvalReport,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    base: toml::Table,
    #[serde(default)]
    row: Vec<GridFileRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFileRow {
    label: String,
    #[serde(default)]
    set: toml::Table,
}

fn apply(base: &toml::Table, over: &str) -> Result<RunConfig> {
    let over: toml::Table = toml::from_str(over).map_err(|e| Error::Config(e.to_string()))?;
    let mut t = base.clone();
    merge_toml(&mut t, &over);
    RunConfig::from_toml_str(&toml::to_string(&t).expect("table serializes"))
}

fn config_table(cfg: &RunConfig) -> toml::Table {
    toml::from_str(&cfg.to_toml_string()).expect("config round-trips")
}

/// The Table 1 layout: two lexical baselines, dense only, RRF, and the full
/// pipeline with re-ranking. Lexical and dense rows return 100 results so the
/// deeper cutoffs are defined.
pub fn default_grid(base: &RunConfig) -> Result<Vec<GridRow>> {
    let t = config_table(base);
    let rows = [
        (
            "BM25 baseline",
            "stage = \"lexical\"\n[lexical]\ntokenizer = \"whitespace\"\npreprocess = false\nk = 100\n",
        ),
        (
            "BM25 + pre-processing",
            "stage = \"lexical\"\n[lexical]\ntokenizer = \"bpe\"\npreprocess = true\nk = 100\n",
        ),
        ("Semantic", "stage = \"semantic\"\n[dense]\nk = 100\n"),
        ("RRF", "stage = \"full\"\n[fusion]\nmode = \"rrf\"\n"),
        ("Pipeline w. re-ranking", "stage = \"full\"\n[fusion]\nmode = \"rerank\"\n"),
    ];
    rows.iter()
        .map(|(label, over)| {
            Ok(GridRow {
                label: label.to_string(),
                config: apply(&t, over)?,
            })
        })
        .collect()
}

/// Grid file: an optional `[base]` table holding a run config and one
/// `[[row]]` per configuration with a `label` and a `[row.set]` override table.
pub fn parse_grid(s: &str) -> Result<Vec<GridRow>> {
    let file: GridFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
    if file.row.is_empty() {
        return Err(Error::Config("grid has no [[row]] entries".into()));
    }
    file.row
        .into_iter()
        .map(|r| {
            let mut t = file.base.clone();
            merge_toml(&mut t, &r.set);
            let config = RunConfig::from_toml_str(&toml::to_string(&t).expect("table serializes"))
                .map_err(|e| Error::Config(format!("row `{}`: {e}", r.label)))?;
            Ok(GridRow { label: r.label, config })
        })
        .collect()
}

pub fn load_grid(path: &Path) -> Result<Vec<GridRow>> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&s)
}

fn tokenizer_key(cfg: &RunConfig) -> String {
    let vocab = match cfg.lexical.tokenizer {
        TokenizerKind::Bpe => Some(cfg.lexical.vocab_size),
        TokenizerKind::Whitespace => None,
    };
    serde_json::json!([cfg.lexical.tokenizer, cfg.effective_normalization(), vocab]).to_string()
}

fn index_key(cfg: &RunConfig) -> String {
    format!("{}|{}|{}", tokenizer_key(cfg), cfg.lexical.k1, cfg.lexical.b)
}

fn dense_key(cfg: &RunConfig) -> String {
    let d = &cfg.dense;
    let tok = match d.provider {
        EmbeddingMode::Hash => tokenizer_key(cfg),
        _ => String::new(),
    };
    serde_json::json!([d.provider, d.endpoint, d.vectors, d.dim, tok]).to_string()
}

#[derive(Default)]
struct PartsCache {
    tokenizers: HashMap<String, Tokenizer>,
    indexes: HashMap<String, Arc<InvertedIndex>>,
    stores: HashMap<String, (Arc<dyn EmbeddingProvider>, Arc<VectorStore>)>,
}

impl PartsCache {
    fn parts(&mut self, cfg: &RunConfig, corpus: &Corpus, exec: Execution) -> Result<EngineParts> {
        let tk = tokenizer_key(cfg);
        let tokenizer = match self.tokenizers.get(&tk) {
            Some(t) => t.clone(),
            None => {
                let t = build_tokenizer(cfg, corpus)?;
                self.tokenizers.insert(tk, t.clone());
                t
            }
        };
        let index = if cfg.needs_lexical() {
            let ik = index_key(cfg);
            Some(match self.indexes.get(&ik) {
                Some(i) => i.clone(),
                None => {
                    let i = Arc::new(InvertedIndex::build(corpus, &tokenizer, cfg.lexical.bm25(), exec)?);
                    self.indexes.insert(ik, i.clone());
                    i
                }
            })
        } else {
            None
        };
        let (embedder, store) = if cfg.needs_dense() {
            let dk = dense_key(cfg);
            let (e, s) = match self.stores.get(&dk) {
                Some(pair) => pair.clone(),
                None => {
                    let e: Arc<dyn EmbeddingProvider> = embedding_provider(cfg, &tokenizer)?.into();
                    let s = Arc::new(VectorStore::build(corpus, e.as_ref(), exec, cfg.dense.batch_size)?);
                    self.stores.insert(dk, (e.clone(), s.clone()));
                    (e, s)
                }
            };
            (Some(e), Some(s))
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
}

/// Evaluate every row. Rows come back in grid order.
pub fn run_ablation(grid: &[GridRow], corpus: &Corpus, queries: &QuerySet, exec: Execution) -> Result<Vec<AblationRow>> {
    if !queries.has_gold {
        return Err(Error::MissingGold);
    }
    let mut cache = PartsCache::default();
    let mut out = Vec::with_capacity(grid.len());
    for row in grid {
        log::info!("ablation row `{}`", row.label);
        let parts = cache.parts(&row.config, corpus, exec)?;
        let engine = Engine::from_parts(row.config.clone(), corpus, parts, exec)?;
        let run = engine.run(queries)?;
        out.push(AblationRow {
            label: row.label.clone(),
            report: run.report.expect("queries carry gold ids"),
        });
    }
    Ok(out)
}

fn cell(report: &EvalReport, metric: &str, k: usize) -> String {
    let map = if metric == "MRR" { &report.mrr } else { &report.success };
    match map.get(&k) {
        Some(v) if k <= report.depth => format!("{:.2}", v * 100.0),
        _ => "-".to_string(),
    }
}

/// Plain-text ablation table; metrics in percent, `-` where a cutoff is deeper
/// than the list the row produced.
pub fn render_ablation(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("configuration".len());
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "configuration");
    for (m, k) in TABLE_COLUMNS {
        let _ = write!(out, "  {:>11}", format!("{m}@{k}"));
    }
    let _ = writeln!(out, "  config");
    for r in rows {
        let _ = write!(out, "{:<width$}", r.label);
        for (m, k) in TABLE_COLUMNS {
            let _ = write!(out, "  {:>11}", cell(&r.report, m, k));
        }
        let _ = writeln!(out, "  {}", r.report.config_fingerprint);
    }
    out.push_str("Success@k is the gold-in-top-k rate, also reported as Precision@k.\n");
    out
}

/// Plain-text summary of a single report.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config {}  queries {}  depth {}", report.config_fingerprint, report.per_query.len(), report.depth);
    if let Some(e) = &report.embedding_fingerprint {
        let _ = writeln!(out, "embedder {e}");
    }
    if let Some(s) = &report.scorer_fingerprint {
        let _ = writeln!(out, "re-ranker {s}");
    }
    let _ = writeln!(out, "{:>6}  {:>8}  {:>22}", "k", "MRR@k", "Success@k/Precision@k");
    for &k in report.mrr.keys() {
        let _ = writeln!(out, "{:>6}  {:>8}  {:>22}", k, cell(report, "MRR", k), cell(report, "Success", k));
    }
    if let Some(c) = report.candidate_recall {
        let _ = writeln!(
            out,
            "candidate recall: lexical {:.2}  semantic {:.2}  merged {:.2}",
            c.lexical * 100.0,
            c.semantic * 100.0,
            c.merged * 100.0
        );
    }
    out
}
