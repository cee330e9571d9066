//! Document corpus and query sets.
//!
//! Documents are represented by title and abstract only; every other column
//! in the source files is ignored.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;

/// On-disk record format for corpus and query files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Tsv,
}

impl Format {
    /// Guess from the file extension; `.tsv`/`.tab` is TSV, anything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => Format::Tsv,
            _ => Format::Jsonl,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::Format(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    #[serde(rename = "cord_uid")]
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
        }
    }

    /// Title and abstract joined by a single newline.
    pub fn text(&self) -> String {
        doc_text(self)
    }
}

/// Canonical text of a document: `title + "\n" + abstract`, verbatim.
pub fn doc_text(d: &Document) -> String {
    let mut s = String::with_capacity(d.title.len() + d.abstract_text.len() + 1);
    s.push_str(&d.title);
    s.push('\n');
    s.push_str(&d.abstract_text);
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    id_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut id_index = HashMap::with_capacity(documents.len());
        for (pos, d) in documents.iter().enumerate() {
            if d.doc_id.is_empty() {
                return Err(Error::Config(format!("document at position {pos} has an empty id")));
            }
            if d.title.is_empty() && d.abstract_text.is_empty() {
                return Err(Error::Config(format!(
                    "document `{}` has neither title nor abstract",
                    d.doc_id
                )));
            }
            if id_index.insert(d.doc_id.clone(), pos).is_some() {
                return Err(Error::DuplicateId {
                    kind: "document",
                    id: d.doc_id.clone(),
                });
            }
        }
        Ok(Self {
            documents,
            id_index,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.id_index.get(doc_id).copied()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.position(doc_id).map(|p| &self.documents[p])
    }

    pub fn id_index(&self) -> &HashMap<String, usize> {
        &self.id_index
    }

    /// Content hash over ids, titles and abstracts in corpus order.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new();
        fp.u64(self.documents.len() as u64);
        for d in &self.documents {
            fp.str(&d.doc_id).str(&d.title).str(&d.abstract_text);
        }
        fp.finish()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    #[serde(rename = "post_id")]
    pub query_id: String,
    #[serde(rename = "tweet_text")]
    pub text: String,
    #[serde(rename = "cord_uid", skip_serializing_if = "Option::is_none")]
    pub gold_doc_id: Option<String>,
}

impl Query {
    pub fn new(
        query_id: impl Into<String>,
        text: impl Into<String>,
        gold_doc_id: Option<&str>,
    ) -> Self {
        Self {
            query_id: query_id.into(),
            text: text.into(),
            gold_doc_id: gold_doc_id.map(str::to_string),
        }
    }
}

/// Ordered queries plus whether every query carries a gold document id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub queries: Vec<Query>,
    pub has_gold: bool,
}

impl QuerySet {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for q in &queries {
            if !seen.insert(q.query_id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "query",
                    id: q.query_id.clone(),
                });
            }
        }
        let has_gold = !queries.is_empty() && queries.iter().all(|q| q.gold_doc_id.is_some());
        Ok(Self { queries, has_gold })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank JSONL lines as (1-based line number, parsed object).
fn jsonl_records(path: &Path) -> Result<Vec<(usize, serde_json::Map<String, Value>)>> {
    let bytes = read_bytes(path)?;
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|e| malformed(path, line_no, format!("invalid UTF-8: {e}")))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(map)) => out.push((line_no, map)),
            Ok(_) => return Err(malformed(path, line_no, "expected a JSON object")),
            Err(e) => return Err(malformed(path, line_no, e.to_string())),
        }
    }
    Ok(out)
}

type TsvRows = Vec<(usize, Vec<String>)>;

/// A TSV file as (header, rows with their 1-based line numbers).
fn tsv_records(path: &Path) -> Result<(Vec<String>, TsvRows)> {
    let bytes = read_bytes(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .from_reader(bytes.as_slice());
    let to_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        malformed(path, line, e.to_string())
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(to_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(to_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h.trim() == name)
}

/// String-ish JSON field: strings verbatim, integers rendered, null/absent as None.
fn json_text(map: &serde_json::Map<String, Value>, key: &str) -> std::result::Result<Option<String>, String> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) if n.is_i64() || n.is_u64() => Ok(Some(n.to_string())),
        Some(other) => Err(format!("field `{key}` has unsupported value {other}")),
    }
}

pub fn load_corpus(path: &Path, format: Format) -> Result<Corpus> {
    let mut docs = Vec::new();
    match format {
        Format::Jsonl => {
            for (line, map) in jsonl_records(path)? {
                let field = |k: &str| json_text(&map, k).map_err(|m| malformed(path, line, m));
                let id = field("cord_uid")?
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| malformed(path, line, "missing `cord_uid`"))?;
                let title = field("title")?.unwrap_or_default();
                let abstract_text = field("abstract")?.unwrap_or_default();
                docs.push((line, Document::new(id, title, abstract_text)));
            }
        }
        Format::Tsv => {
            let (header, rows) = tsv_records(path)?;
            let id_col = column(&header, "cord_uid")
                .ok_or_else(|| malformed(path, 1, "header lacks `cord_uid` column"))?;
            let title_col = column(&header, "title");
            let abs_col = column(&header, "abstract");
            for (line, row) in rows {
                let get = |c: Option<usize>| c.and_then(|c| row.get(c)).cloned().unwrap_or_default();
                let id = get(Some(id_col));
                if id.is_empty() {
                    return Err(malformed(path, line, "empty `cord_uid`"));
                }
                docs.push((line, Document::new(id, get(title_col), get(abs_col))));
            }
        }
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (line, d) in &docs {
        if d.title.is_empty() && d.abstract_text.is_empty() {
            return Err(malformed(path, *line, "document has neither title nor abstract"));
        }
    }
    let corpus = Corpus::new(docs.into_iter().map(|(_, d)| d).collect())?;
    log::info!("loaded {} documents from {}", corpus.len(), path.display());
    Ok(corpus)
}

fn check_single_gold(path: &Path, line: usize, gold: &str) -> Result<()> {
    if gold.starts_with('[') || gold.contains(',') || gold.contains(char::is_whitespace) {
        return Err(malformed(
            path,
            line,
            format!("multiple gold ids are not supported: {gold:?}"),
        ));
    }
    Ok(())
}

pub fn load_queries(path: &Path, format: Format) -> Result<QuerySet> {
    let mut queries = Vec::new();
    match format {
        Format::Jsonl => {
            for (line, map) in jsonl_records(path)? {
                let field = |k: &str| json_text(&map, k).map_err(|m| malformed(path, line, m));
                let id = field("post_id")?
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| malformed(path, line, "missing `post_id`"))?;
                let text = field("tweet_text")?
                    .ok_or_else(|| malformed(path, line, "missing `tweet_text`"))?;
                let gold = field("cord_uid")?.filter(|s| !s.is_empty());
                if let Some(g) = &gold {
                    check_single_gold(path, line, g)?;
                }
                queries.push(Query {
                    query_id: id,
                    text,
                    gold_doc_id: gold,
                });
            }
        }
        Format::Tsv => {
            let (header, rows) = tsv_records(path)?;
            let id_col = column(&header, "post_id")
                .ok_or_else(|| malformed(path, 1, "header lacks `post_id` column"))?;
            let text_col = column(&header, "tweet_text")
                .ok_or_else(|| malformed(path, 1, "header lacks `tweet_text` column"))?;
            let gold_col = column(&header, "cord_uid");
            for (line, row) in rows {
                let id = row.get(id_col).cloned().unwrap_or_default();
                if id.is_empty() {
                    return Err(malformed(path, line, "empty `post_id`"));
                }
                let gold = gold_col
                    .and_then(|c| row.get(c))
                    .filter(|s| !s.is_empty())
                    .cloned();
                if let Some(g) = &gold {
                    check_single_gold(path, line, g)?;
                }
                queries.push(Query {
                    query_id: id,
                    text: row[text_col].clone(),
                    gold_doc_id: gold,
                });
            }
        }
    }
    let set = QuerySet::new(queries)?;
    log::info!(
        "loaded {} queries from {} ({})",
        set.len(),
        path.display(),
        if set.has_gold { "with gold" } else { "no gold" }
    );
    Ok(set)
}
