//! Declarative run configuration. Every tunable of the pipeline lives here;
//! the whole struct is hashed into the config fingerprint carried by reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::QueryAugmentation;
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;
use crate::fusion::RrfParams;
use crate::lexical::{Bm25Params, NormalizationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Lexical,
    Semantic,
    #[default]
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    Whitespace,
    #[default]
    Bpe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexicalConfig {
    pub tokenizer: TokenizerKind,
    /// Apply `normalization`; when off, text is only whitespace-collapsed.
    pub preprocess: bool,
    pub vocab_size: usize,
    pub k1: f64,
    pub b: f64,
    pub k: usize,
}

impl Default for LexicalConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self {
            tokenizer: TokenizerKind::Bpe,
            preprocess: true,
            vocab_size: 30_000,
            k1: p.k1,
            b: p.b,
            k: 30,
        }
    }
}

impl LexicalConfig {
    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Service,
    File,
    #[default]
    Hash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseConfig {
    pub provider: EmbeddingMode,
    /// Model-server base URL (service mode).
    pub endpoint: Option<String>,
    /// Precomputed vector files (file mode): documents, and queries keyed by post id.
    pub vectors: Vec<PathBuf>,
    pub dim: usize,
    pub batch_size: usize,
    pub k: usize,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            provider: EmbeddingMode::Hash,
            endpoint: None,
            vectors: Vec::new(),
            dim: 256,
            batch_size: 32,
            k: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Rerank,
    Rrf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankerMode {
    Service,
    #[default]
    OverlapStub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub top_n: usize,
    pub rrf_constant: f64,
    pub rrf_window: usize,
    pub reranker: RerankerMode,
    pub rerank_endpoint: Option<String>,
    pub rerank_batch_size: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let rrf = RrfParams::default();
        Self {
            mode: FusionMode::Rerank,
            top_n: 5,
            rrf_constant: rrf.rank_constant,
            rrf_window: rrf.window,
            reranker: RerankerMode::OverlapStub,
            rerank_endpoint: None,
            rerank_batch_size: 32,
        }
    }
}

impl FusionConfig {
    pub fn rrf(&self) -> RrfParams {
        RrfParams {
            rank_constant: self.rrf_constant,
            window: self.rrf_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    Service,
    #[default]
    Canned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub query: QueryAugmentation,
    pub hyde: bool,
    pub ad: bool,
    pub generator: GeneratorMode,
    pub endpoint: Option<String>,
    pub fixture: Option<PathBuf>,
}

impl AugmentConfig {
    pub fn enabled(&self) -> bool {
        self.query != QueryAugmentation::None || self.hyde || self.ad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub cutoffs: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![1, 5, 30, 100],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stage: Stage,
    pub normalization: NormalizationConfig,
    pub lexical: LexicalConfig,
    pub dense: DenseConfig,
    pub fusion: FusionConfig,
    pub augment: AugmentConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Normalization actually applied by the lexical tokenizer.
    pub fn effective_normalization(&self) -> NormalizationConfig {
        if self.lexical.preprocess {
            self.normalization.clone()
        } else {
            NormalizationConfig::raw()
        }
    }

    pub fn needs_lexical(&self) -> bool {
        self.stage != Stage::Semantic
    }

    pub fn needs_dense(&self) -> bool {
        self.stage != Stage::Lexical
    }

    /// Length of the ranked list a run produces per query.
    pub fn depth(&self) -> usize {
        match self.stage {
            Stage::Lexical => self.lexical.k,
            Stage::Semantic => self.dense.k,
            Stage::Full => self.fusion.top_n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lexical.bm25().validate()?;
        if self.fusion.mode == FusionMode::Rrf {
            self.fusion.rrf().validate()?;
        }
        for (name, v) in [("lexical.k", self.lexical.k), ("dense.k", self.dense.k), ("fusion.top_n", self.fusion.top_n)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.dense.dim < 2 {
            return Err(Error::Config("dense.dim must be at least 2".into()));
        }
        if self.dense.provider == EmbeddingMode::File && self.dense.vectors.is_empty() {
            return Err(Error::Config("file embedding mode needs dense.vectors".into()));
        }
        if self.eval.cutoffs.is_empty() {
            return Err(Error::Config("eval.cutoffs must not be empty".into()));
        }
        if self.normalization.preserved_symbols.iter().any(|c| c.is_alphanumeric() || c.is_whitespace()) {
            return Err(Error::Config(
                "preserved_symbols may only hold punctuation or symbol characters".into(),
            ));
        }
        if self.augment.enabled()
            && self.augment.generator == GeneratorMode::Canned
            && self.augment.fixture.is_none()
        {
            return Err(Error::Config("canned generation needs augment.fixture".into()));
        }
        Ok(())
    }

    /// Hash of the canonical JSON form (object keys sorted), so it does not
    /// depend on field order in the source file.
    pub fn fingerprint(&self) -> String {
        let value = serde_json::to_value(self).expect("run config serializes");
        sha256_hex(value.to_string().as_bytes())[..16].to_string()
    }
}

/// Deep-merge `over` into `base`: tables merge recursively, other values replace.
pub fn merge_toml(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_toml(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}
