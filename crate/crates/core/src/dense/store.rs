use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::provider::{embed, EmbedItem, EmbeddingProvider, Role};
use super::vector::{dot, l2_norm, EmbeddingVector, NORM_TOLERANCE};
use crate::candidate::{ranked_candidates, sort_by_score_then_id, Candidate, Source};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::exec::Execution;

const MAGIC: &[u8; 8] = b"SCISEMB\0";
pub const EMBEDDING_FORMAT_VERSION: u32 = 1;
const SCAN_BLOCK: usize = 1024;

/// Contents of a precomputed-embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub provider_fingerprint: String,
    pub rows: Vec<(String, Vec<f32>)>,
}

pub fn write_embedding_file<W: Write>(mut w: W, file: &EmbeddingFile) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(EMBEDDING_FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(file.dim as u32)?;
    w.write_u64::<LittleEndian>(file.rows.len() as u64)?;
    w.write_u32::<LittleEndian>(file.provider_fingerprint.len() as u32)?;
    w.write_all(file.provider_fingerprint.as_bytes())?;
    for (id, v) in &file.rows {
        w.write_u32::<LittleEndian>(id.len() as u32)?;
        w.write_all(id.as_bytes())?;
        for &x in v {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

pub fn parse_embedding_file<R: Read>(mut r: R) -> Result<EmbeddingFile> {
    let io = |e: std::io::Error| Error::Format(format!("truncated or invalid embedding file: {e}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an embedding file".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != EMBEDDING_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "embedding format version {version}, expected {EMBEDDING_FORMAT_VERSION}"
        )));
    }
    let dim = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let count = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let provider_fingerprint = read_string(&mut r).map_err(io)?;
    let mut rows = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let id = read_string(&mut r).map_err(io)?;
        let mut v = vec![0f32; dim];
        r.read_f32_into::<LittleEndian>(&mut v).map_err(io)?;
        rows.push((id, v));
    }
    Ok(EmbeddingFile {
        dim,
        provider_fingerprint,
        rows,
    })
}

pub fn read_embedding_file(path: &Path) -> Result<EmbeddingFile> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embedding_file(std::io::BufReader::new(f)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Exact-scan store of unit-norm document embeddings.
///
/// Every document owns at least one row; augmentation may add further rows
/// that map back to the same document.
#[derive(Debug, Clone)]
pub struct VectorStore {
    doc_ids: Vec<String>,
    positions: HashMap<String, u32>,
    dim: usize,
    matrix: Vec<f32>,
    row_doc: Vec<u32>,
    provider_fingerprint: String,
}

impl VectorStore {
    pub fn new(dim: usize, provider_fingerprint: impl Into<String>) -> Self {
        Self {
            doc_ids: Vec::new(),
            positions: HashMap::new(),
            dim,
            matrix: Vec::new(),
            row_doc: Vec::new(),
            provider_fingerprint: provider_fingerprint.into(),
        }
    }

    /// Embed every document once (title + abstract, no chunking).
    pub fn build(
        corpus: &Corpus,
        provider: &dyn EmbeddingProvider,
        exec: Execution,
        batch_size: usize,
    ) -> Result<Self> {
        let texts: Vec<(String, String)> = corpus
            .documents()
            .iter()
            .map(|d| (d.doc_id.clone(), d.text()))
            .collect();
        let batches: Vec<&[(String, String)]> = texts.chunks(batch_size.max(1)).collect();
        let embedded = exec.try_map(&batches, |batch| {
            let items: Vec<EmbedItem<'_>> = batch
                .iter()
                .map(|(id, text)| EmbedItem { id, text })
                .collect();
            embed(provider, &items, Role::Document)
        })?;
        let mut store = Self::new(provider.dim(), provider.fingerprint());
        for (v, (id, _)) in embedded.into_iter().flatten().zip(&texts) {
            store.push_row(id, v)?;
        }
        Ok(store)
    }

    /// Append a row for `doc_id`, registering the document if new.
    pub fn push_row(&mut self, doc_id: &str, v: EmbeddingVector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.dim(),
            });
        }
        let pos = match self.positions.get(doc_id) {
            Some(&p) => p,
            None => {
                let p = self.doc_ids.len() as u32;
                self.doc_ids.push(doc_id.to_string());
                self.positions.insert(doc_id.to_string(), p);
                p
            }
        };
        self.matrix.extend_from_slice(v.as_slice());
        self.row_doc.push(pos);
        Ok(())
    }

    /// Add an extra row for a document that is already stored.
    pub fn push_variant(&mut self, doc_id: &str, v: EmbeddingVector) -> Result<()> {
        if !self.positions.contains_key(doc_id) {
            return Err(Error::UnknownDocument(doc_id.to_string()));
        }
        self.push_row(doc_id, v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_doc.len()
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_doc_id(&self, i: usize) -> &str {
        &self.doc_ids[self.row_doc[i] as usize]
    }

    /// Dot product of the query with every row, in row order.
    pub fn scan(&self, query: &EmbeddingVector, exec: Execution) -> Result<Vec<f64>> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let starts: Vec<usize> = (0..self.num_rows()).step_by(SCAN_BLOCK).collect();
        let blocks = exec.map(&starts, |&s| {
            let end = (s + SCAN_BLOCK).min(self.num_rows());
            (s..end).map(|i| dot(self.row(i), query.as_slice())).collect::<Vec<f64>>()
        });
        Ok(blocks.into_iter().flatten().collect())
    }

    /// Exact top-`k` documents by dot product. A document with several rows is
    /// listed once, with its best row's score.
    pub fn search(&self, query: &EmbeddingVector, k: usize, exec: Execution) -> Result<Vec<Candidate>> {
        let scores = self.scan(query, exec)?;
        let mut best = vec![f64::NEG_INFINITY; self.num_docs()];
        for (row, s) in scores.into_iter().enumerate() {
            let d = self.row_doc[row] as usize;
            if s > best[d] {
                best[d] = s;
            }
        }
        let mut scored: Vec<(&str, f64)> = self
            .doc_ids
            .iter()
            .map(String::as_str)
            .zip(best)
            .collect();
        sort_by_score_then_id(&mut scored);
        scored.truncate(k);
        Ok(ranked_candidates(scored, Source::Semantic))
    }

    pub fn check_unit_norms(&self) -> Result<()> {
        for i in 0..self.num_rows() {
            let n = l2_norm(self.row(i));
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::BadNorm {
                    id: self.row_doc_id(i).to_string(),
                    norm: n,
                });
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> EmbeddingFile {
        EmbeddingFile {
            dim: self.dim,
            provider_fingerprint: self.provider_fingerprint.clone(),
            rows: (0..self.num_rows())
                .map(|i| (self.row_doc_id(i).to_string(), self.row(i).to_vec()))
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        write_embedding_file(&mut w, &self.to_file())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Load a store; rows sharing an id become variants of one document.
    pub fn load(path: &Path) -> Result<Self> {
        let file = read_embedding_file(path)?;
        let mut store = Self::new(file.dim, file.provider_fingerprint);
        for (id, v) in file.rows {
            let v = EmbeddingVector::from_provider(&id, v)?;
            store.push_row(&id, v)?;
        }
        Ok(store)
    }

    /// Every corpus document has a row and no row belongs to an unknown document.
    pub fn check_covers(&self, corpus: &Corpus) -> Result<()> {
        for d in corpus.documents() {
            if !self.positions.contains_key(&d.doc_id) {
                return Err(Error::MissingVector(d.doc_id.clone()));
            }
        }
        if let Some(id) = self.doc_ids.iter().find(|id| corpus.position(id).is_none()) {
            return Err(Error::UnknownDocument(id.clone()));
        }
        Ok(())
    }
}

pub fn build_vector_store(corpus: &Corpus, provider: &dyn EmbeddingProvider) -> Result<VectorStore> {
    VectorStore::build(corpus, provider, Execution::available(), 64)
}

pub fn semantic_topk(store: &VectorStore, query: &EmbeddingVector, k: usize) -> Result<Vec<Candidate>> {
    store.search(query, k, Execution::available())
}
