use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::tokenizer::Tokenizer;
use crate::candidate::{by_score_desc, ranked_candidates, Candidate, Source};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fingerprint::sha256_hex;

const MAGIC: &[u8; 8] = b"SCISBM25";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Okapi BM25 inverted index. Terms are stored in lexicographic order and each
/// posting list is sorted by document position.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    avgdl: f64,
    terms: HashMap<String, u32>,
    term_names: Vec<String>,
    postings: Vec<Vec<Posting>>,
    params: Bm25Params,
    tokenizer: Tokenizer,
    corpus_fingerprint: String,
}

pub fn build_inverted_index(corpus: &Corpus, tokenizer: &Tokenizer, params: Bm25Params) -> Result<InvertedIndex> {
    InvertedIndex::build(corpus, tokenizer, params, Execution::available())
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, tokenizer: &Tokenizer, params: Bm25Params, exec: Execution) -> Result<Self> {
        params.validate()?;
        let docs = corpus.documents();
        let tokenized: Vec<Vec<String>> = exec.map(docs, |d| tokenizer.tokenize(&d.text()));

        let mut by_term: BTreeMap<&str, Vec<Posting>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (pos, tokens) in tokenized.iter().enumerate() {
            doc_len.push(tokens.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (t, n) in tf {
                by_term.entry(t).or_default().push(Posting {
                    doc: pos as u32,
                    tf: n,
                });
            }
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avgdl = total as f64 / docs.len() as f64;

        let mut term_names = Vec::with_capacity(by_term.len());
        let mut postings = Vec::with_capacity(by_term.len());
        for (t, p) in by_term {
            term_names.push(t.to_string());
            postings.push(p);
        }
        Ok(Self::assemble(
            docs.iter().map(|d| d.doc_id.clone()).collect(),
            doc_len,
            avgdl,
            term_names,
            postings,
            params,
            tokenizer.clone(),
            corpus.fingerprint(),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        doc_ids: Vec<String>,
        doc_len: Vec<u32>,
        avgdl: f64,
        term_names: Vec<String>,
        postings: Vec<Vec<Posting>>,
        params: Bm25Params,
        tokenizer: Tokenizer,
        corpus_fingerprint: String,
    ) -> Self {
        let terms = term_names
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            doc_ids,
            doc_len,
            avgdl,
            terms,
            term_names,
            postings,
            params,
            tokenizer,
            corpus_fingerprint,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_len(&self) -> &[u32] {
        &self.doc_len
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn corpus_fingerprint(&self) -> &str {
        &self.corpus_fingerprint
    }

    pub fn num_terms(&self) -> usize {
        self.term_names.len()
    }

    /// Document frequency; 0 for unknown terms.
    pub fn df(&self, term: &str) -> usize {
        self.postings_for(term).map_or(0, <[Posting]>::len)
    }

    pub fn postings_for(&self, term: &str) -> Option<&[Posting]> {
        self.terms.get(term).map(|&id| self.postings[id as usize].as_slice())
    }

    /// Iterate `(term, postings)` in lexicographic term order.
    pub fn iter_terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.term_names
            .iter()
            .map(String::as_str)
            .zip(self.postings.iter().map(Vec::as_slice))
    }

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); always positive.
    pub fn idf(&self, df: usize) -> f64 {
        let n = self.num_docs() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, df: usize, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = k1 * (1.0 - b + b * doc_len as f64 / self.avgdl);
        self.idf(df) * (tf * (k1 + 1.0)) / (tf + norm)
    }

    /// BM25 score of one document against already-tokenized query terms.
    /// Repeated query terms contribute once per occurrence.
    pub fn score(&self, query_tokens: &[String], doc: usize) -> Result<f64> {
        if doc >= self.num_docs() {
            return Err(Error::InvalidDocument(doc));
        }
        let mut score = 0.0;
        for t in query_tokens {
            let Some(list) = self.postings_for(t) else { continue };
            if let Ok(i) = list.binary_search_by_key(&(doc as u32), |p| p.doc) {
                score += self.term_weight(list.len(), list[i].tf, self.doc_len[doc]);
            }
        }
        Ok(score)
    }

    /// Score every document that shares at least one token with the query.
    /// Returns `(position, score)` best first, ties by doc id.
    pub fn search_tokens(&self, query_tokens: &[String], k: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut acc = vec![0.0f64; self.num_docs()];
        let mut hit = vec![false; self.num_docs()];
        for t in query_tokens {
            let Some(list) = self.postings_for(t) else { continue };
            let df = list.len();
            for p in list {
                let d = p.doc as usize;
                acc[d] += self.term_weight(df, p.tf, self.doc_len[d]);
                hit[d] = true;
            }
        }
        let mut scored: Vec<(usize, f64)> = (0..self.num_docs())
            .filter(|&d| hit[d] && acc[d] > 0.0)
            .map(|d| (d, acc[d]))
            .collect();
        scored.sort_by(|a, b| {
            by_score_desc(a.1, b.1)
                .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
        });
        scored.truncate(k);
        scored
    }

    pub fn search(&self, query: &str, k: usize) -> Vec<Candidate> {
        let tokens = self.tokenizer.tokenize(query);
        let hits = self.search_tokens(&tokens, k);
        ranked_candidates(
            hits.into_iter().map(|(d, s)| (self.doc_ids[d].clone(), s)),
            Source::Lexical,
        )
    }

    /// Content hash of the serialized index.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        sha256_hex(&buf)[..32].to_string()
    }

    /// Versioned little-endian binary encoding.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(INDEX_FORMAT_VERSION)?;
        write_str(&mut w, &self.corpus_fingerprint)?;
        write_str(&mut w, &self.tokenizer.fingerprint())?;
        w.write_f64::<LittleEndian>(self.params.k1)?;
        w.write_f64::<LittleEndian>(self.params.b)?;
        w.write_u64::<LittleEndian>(self.doc_ids.len() as u64)?;
        for (id, len) in self.doc_ids.iter().zip(&self.doc_len) {
            write_str(&mut w, id)?;
            w.write_u32::<LittleEndian>(*len)?;
        }
        w.write_u64::<LittleEndian>(self.term_names.len() as u64)?;
        for (t, list) in self.iter_terms() {
            write_str(&mut w, t)?;
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for p in list {
                w.write_u32::<LittleEndian>(p.doc)?;
                w.write_u32::<LittleEndian>(p.tf)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Load an index written by [`InvertedIndex::save`]. The tokenizer must be
    /// the one the index was built with.
    pub fn load(path: &Path, tokenizer: &Tokenizer) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f), tokenizer).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read_from<R: Read>(mut r: R, tokenizer: &Tokenizer) -> Result<Self> {
        let io = |e: std::io::Error| Error::io("<index>", e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a lexical index file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != INDEX_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "index format version {version}, expected {INDEX_FORMAT_VERSION}"
            )));
        }
        let corpus_fingerprint = read_str(&mut r).map_err(io)?;
        let tok_fp = read_str(&mut r).map_err(io)?;
        if tok_fp != tokenizer.fingerprint() {
            return Err(Error::Format("index was built with a different tokenizer".into()));
        }
        let params = Bm25Params {
            k1: r.read_f64::<LittleEndian>().map_err(io)?,
            b: r.read_f64::<LittleEndian>().map_err(io)?,
        };
        let n = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let mut doc_ids = Vec::with_capacity(n);
        let mut doc_len = Vec::with_capacity(n);
        for _ in 0..n {
            doc_ids.push(read_str(&mut r).map_err(io)?);
            doc_len.push(r.read_u32::<LittleEndian>().map_err(io)?);
        }
        let nterms = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let mut term_names = Vec::with_capacity(nterms);
        let mut postings = Vec::with_capacity(nterms);
        for _ in 0..nterms {
            term_names.push(read_str(&mut r).map_err(io)?);
            let len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let doc = r.read_u32::<LittleEndian>().map_err(io)?;
                let tf = r.read_u32::<LittleEndian>().map_err(io)?;
                if doc as usize >= n {
                    return Err(Error::Format(format!("posting references document {doc} of {n}")));
                }
                list.push(Posting { doc, tf });
            }
            postings.push(list);
        }
        if n == 0 {
            return Err(Error::Format("index holds no documents".into()));
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avgdl = total as f64 / n as f64;
        Ok(Self::assemble(
            doc_ids,
            doc_len,
            avgdl,
            term_names,
            postings,
            params,
            tokenizer.clone(),
            corpus_fingerprint,
        ))
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// BM25 score of the document at `doc` for `query_tokens`.
pub fn bm25_score(index: &InvertedIndex, query_tokens: &[String], doc: usize) -> Result<f64> {
    index.score(query_tokens, doc)
}

/// Top-`k` documents by BM25 for a raw query, as lexical candidates.
pub fn lexical_topk(index: &InvertedIndex, query: &str, k: usize) -> Vec<Candidate> {
    index.search(query, k)
}
