//! Sources of embeddings: a deterministic hashing embedder for offline runs,
//! precomputed vector files, and the model server's `/embed` endpoint.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::store::read_embedding_file;
use super::vector::EmbeddingVector;
use crate::error::{Error, Result};
use crate::http::JsonClient;
use crate::lexical::{tokenize, BpeVocab, NormalizationConfig, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Query,
    Document,
}

/// One text to embed. `id` is used only by providers that look vectors up by
/// identifier (precomputed files).
#[derive(Debug, Clone, Copy)]
pub struct EmbedItem<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifies the embedding source in stores and reports.
    fn fingerprint(&self) -> String;

    /// Raw vectors, one per item and in item order.
    fn embed_raw(&self, items: &[EmbedItem<'_>], role: Role) -> Result<Vec<Vec<f32>>>;
}

/// Embed `items`, enforcing count, dimensionality, finiteness and unit norm.
pub fn embed(
    provider: &dyn EmbeddingProvider,
    items: &[EmbedItem<'_>],
    role: Role,
) -> Result<Vec<EmbeddingVector>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let raw = provider.embed_raw(items, role)?;
    if raw.len() != items.len() {
        return Err(Error::Provider {
            endpoint: provider.fingerprint(),
            message: format!("{} vectors for {} texts", raw.len(), items.len()),
        });
    }
    raw.into_iter()
        .zip(items)
        .map(|(v, item)| {
            if v.len() != provider.dim() {
                return Err(Error::DimensionMismatch {
                    expected: provider.dim(),
                    actual: v.len(),
                });
            }
            EmbeddingVector::from_provider(item.id, v)
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn hash_bucket(token: &str, dim: usize) -> usize {
    (fnv1a(token.as_bytes()) % dim as u64) as usize
}

fn bucket_counts(tokens: &[String], dim: usize) -> EmbeddingVector {
    let mut counts = vec![0.0f32; dim];
    for t in tokens {
        counts[hash_bucket(t, dim)] += 1.0;
    }
    EmbeddingVector::normalize(&counts).unwrap_or_else(|_| EmbeddingVector::basis(dim, 0))
}

/// Bag-of-tokens hashing embedding: each token adds one to bucket
/// `fnv1a(token) mod dim`, then the counts are L2-normalized. Text without
/// tokens maps to the unit vector on bucket 0.
pub fn hash_embed(text: &str, dim: usize, vocab: &BpeVocab, cfg: &NormalizationConfig) -> EmbeddingVector {
    assert!(dim >= 2, "hash embedding needs dim >= 2");
    bucket_counts(&tokenize(text, vocab, cfg), dim)
}

/// Deterministic offline stand-in for a neural embedder.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    tokenizer: Tokenizer,
}

impl HashEmbedder {
    pub fn new(dim: usize, tokenizer: Tokenizer) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("hash embedder needs dim >= 2, got {dim}")));
        }
        Ok(Self { dim, tokenizer })
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        bucket_counts(&self.tokenizer.tokenize(text), self.dim)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("hash-fnv1a:dim={}:tok={}", self.dim, self.tokenizer.fingerprint())
    }

    fn embed_raw(&self, items: &[EmbedItem<'_>], _role: Role) -> Result<Vec<Vec<f32>>> {
        Ok(items.iter().map(|i| self.embed_text(i.text).into_inner()).collect())
    }
}

/// Vectors precomputed elsewhere, looked up by id.
#[derive(Debug, Clone)]
pub struct FileEmbeddings {
    dim: usize,
    fingerprint: String,
    vectors: HashMap<String, Vec<f32>>,
    source: PathBuf,
}

impl FileEmbeddings {
    pub fn open(path: &Path) -> Result<Self> {
        let file = read_embedding_file(path)?;
        let mut vectors = HashMap::with_capacity(file.rows.len());
        for (id, v) in file.rows {
            if vectors.insert(id.clone(), v).is_some() {
                return Err(Error::DuplicateId { kind: "vector", id });
            }
        }
        Ok(Self {
            dim: file.dim,
            fingerprint: file.provider_fingerprint,
            vectors,
            source: path.to_path_buf(),
        })
    }

    /// Merge several files with the same dimensionality (e.g. document and
    /// query vectors).
    pub fn open_many(paths: &[PathBuf]) -> Result<Self> {
        let (first, rest) = paths
            .split_first()
            .ok_or_else(|| Error::Config("no embedding files given".into()))?;
        let mut all = Self::open(first)?;
        for p in rest {
            let more = Self::open(p)?;
            if more.dim != all.dim {
                return Err(Error::DimensionMismatch {
                    expected: all.dim,
                    actual: more.dim,
                });
            }
            for (id, v) in more.vectors {
                if all.vectors.insert(id.clone(), v).is_some() {
                    return Err(Error::DuplicateId { kind: "vector", id });
                }
            }
        }
        Ok(all)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn embed_raw(&self, items: &[EmbedItem<'_>], _role: Role) -> Result<Vec<Vec<f32>>> {
        items
            .iter()
            .map(|i| {
                self.vectors
                    .get(i.id)
                    .cloned()
                    .ok_or_else(|| Error::MissingVector(i.id.to_string()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<&'a str>,
    role: Role,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
    #[serde(default)]
    dim: Option<usize>,
    model_fingerprint: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct HealthResponse {
    #[serde(default)]
    pub status: Option<String>,
    #[serde(default)]
    pub embed_model_fingerprint: Option<String>,
    #[serde(default)]
    pub rerank_model_fingerprint: Option<String>,
    #[serde(default)]
    pub query_instruction: Option<String>,
}

/// Client for the model server's `POST /embed`.
#[derive(Debug, Clone)]
pub struct ServiceEmbedder {
    client: JsonClient,
    dim: usize,
    batch_size: usize,
    fingerprint: String,
}

impl ServiceEmbedder {
    /// Checks `GET /health` and records the embedding checkpoint fingerprint.
    pub fn connect(endpoint: &str, dim: usize, batch_size: usize) -> Result<Self> {
        let client = JsonClient::new(endpoint)?;
        let health: HealthResponse = client.get("/health")?;
        let fingerprint = health.embed_model_fingerprint.ok_or_else(|| Error::Provider {
            endpoint: endpoint.to_string(),
            message: "health response lacks embed_model_fingerprint".into(),
        })?;
        Ok(Self {
            client,
            dim,
            batch_size: batch_size.max(1),
            fingerprint,
        })
    }
}

impl EmbeddingProvider for ServiceEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn embed_raw(&self, items: &[EmbedItem<'_>], role: Role) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(self.batch_size) {
            let req = EmbedRequest {
                texts: chunk.iter().map(|i| i.text).collect(),
                role,
            };
            let resp: EmbedResponse = self.client.post("/embed", &req)?;
            if resp.model_fingerprint != self.fingerprint {
                return Err(Error::Provider {
                    endpoint: self.client.base().to_string(),
                    message: format!(
                        "model fingerprint changed from {} to {}",
                        self.fingerprint, resp.model_fingerprint
                    ),
                });
            }
            if let Some(d) = resp.dim {
                if d != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        actual: d,
                    });
                }
            }
            if resp.vectors.len() != chunk.len() {
                return Err(Error::Provider {
                    endpoint: self.client.base().to_string(),
                    message: format!("{} vectors for {} texts", resp.vectors.len(), chunk.len()),
                });
            }
            out.extend(resp.vectors);
        }
        Ok(out)
    }
}
