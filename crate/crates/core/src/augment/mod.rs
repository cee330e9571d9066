//! Optional LLM-based augmentation: query rewriting and expansion for the
//! lexical branch, hypothetical documents for the semantic query, and extra
//! document variants for the vector store. All of it is off by default.

pub mod generator;
pub mod templates;

use serde::{Deserialize, Serialize};

pub use generator::{
    input_hash, CachedGenerator, CannedGenerator, FixtureEntry, ServiceGenerator, TextGenerator,
};
pub use templates::TemplateName;

use crate::corpus::Document;
use crate::error::{Error, Result};

const EXPAND_SEPARATOR: &str = " || ";

fn non_empty(template: TemplateName, text: String) -> Result<String> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::EmptyGeneration(template.to_string()));
    }
    Ok(t.to_string())
}

/// Academic rewrite of a post, used verbatim as the lexical query. Empty
/// output is an error; the original post is never substituted.
pub fn rewrite_query(gen: &dyn TextGenerator, tweet: &str) -> Result<String> {
    let t = TemplateName::Rewrite;
    non_empty(t, gen.generate(t, &t.fill_tweet(tweet))?)
}

/// Split `corrected || academic` output into its two halves.
pub fn parse_expansion(raw: &str) -> Result<(String, String)> {
    let trimmed = raw.trim();
    let unquoted = trimmed
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(trimmed);
    let (corrected, academic) =
        unquoted
            .split_once(EXPAND_SEPARATOR)
            .ok_or_else(|| Error::GenerationParse {
                reason: format!("separator {EXPAND_SEPARATOR:?} not found"),
                raw: raw.to_string(),
            })?;
    let (corrected, academic) = (corrected.trim(), academic.trim());
    if corrected.is_empty() && academic.is_empty() {
        return Err(Error::GenerationParse {
            reason: "both halves are empty".into(),
            raw: raw.to_string(),
        });
    }
    Ok((corrected.to_string(), academic.to_string()))
}

/// Corrected post followed by its academic version, joined by a space.
pub fn expand_query(gen: &dyn TextGenerator, tweet: &str) -> Result<String> {
    let t = TemplateName::Expand;
    let raw = gen.generate(t, &t.fill_tweet(tweet))?;
    let (corrected, academic) = parse_expansion(&raw)?;
    Ok(match (corrected.is_empty(), academic.is_empty()) {
        (true, _) => academic,
        (_, true) => corrected,
        _ => format!("{corrected} {academic}"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypotheticalDocument {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl HypotheticalDocument {
    /// Same layout as a corpus document's text.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_text)
    }
}

/// Parse the JSON object in a HyDE answer, tolerating text or code fences
/// around it.
pub fn parse_hypothetical(raw: &str) -> Result<HypotheticalDocument> {
    let parse_err = |reason: String| Error::GenerationParse {
        reason,
        raw: raw.to_string(),
    };
    let start = raw.find('{').ok_or_else(|| parse_err("no JSON object".into()))?;
    let end = raw.rfind('}').ok_or_else(|| parse_err("no JSON object".into()))?;
    if end < start {
        return Err(parse_err("no JSON object".into()));
    }
    let doc: HypotheticalDocument =
        serde_json::from_str(&raw[start..=end]).map_err(|e| parse_err(e.to_string()))?;
    if doc.title.trim().is_empty() && doc.abstract_text.trim().is_empty() {
        return Err(parse_err("empty title and abstract".into()));
    }
    Ok(doc)
}

pub fn hyde_document(gen: &dyn TextGenerator, tweet: &str) -> Result<HypotheticalDocument> {
    let t = TemplateName::Hyde;
    let raw = gen.generate(t, &t.fill_tweet(tweet))?;
    parse_hypothetical(&raw)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentVariants {
    pub doc_id: String,
    pub summary: String,
    pub synthetic_tweet: String,
}

impl DocumentVariants {
    pub fn texts(&self) -> [&str; 2] {
        [&self.summary, &self.synthetic_tweet]
    }
}

/// Summary and synthetic post for one document.
pub fn augment_corpus(gen: &dyn TextGenerator, d: &Document) -> Result<DocumentVariants> {
    let s = TemplateName::DocSummary;
    let summary = non_empty(s, gen.generate(s, &s.fill_document(&d.title, &d.abstract_text))?)?;
    let t = TemplateName::DocTweet;
    let synthetic_tweet = non_empty(t, gen.generate(t, &t.fill_document(&d.title, &d.abstract_text))?)?;
    Ok(DocumentVariants {
        doc_id: d.doc_id.clone(),
        summary,
        synthetic_tweet,
    })
}

/// Which augmentations a run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryAugmentation {
    #[default]
    None,
    Rewrite,
    Expand,
}
