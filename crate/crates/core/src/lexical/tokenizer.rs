use std::sync::Arc;

use super::bpe::BpeVocab;
use super::normalize::{normalize_text, NormalizationConfig};

/// Text to lexical tokens: normalization followed by either plain whitespace
/// splitting or BPE subword splitting of each word.
#[derive(Debug, Clone, PartialEq)]
pub enum Tokenizer {
    Whitespace(NormalizationConfig),
    Bpe {
        vocab: Arc<BpeVocab>,
        normalization: NormalizationConfig,
    },
}

impl Tokenizer {
    pub fn bpe(vocab: BpeVocab, normalization: NormalizationConfig) -> Self {
        Tokenizer::Bpe {
            vocab: Arc::new(vocab),
            normalization,
        }
    }

    pub fn normalization(&self) -> &NormalizationConfig {
        match self {
            Tokenizer::Whitespace(n) => n,
            Tokenizer::Bpe { normalization, .. } => normalization,
        }
    }

    pub fn vocab(&self) -> Option<&BpeVocab> {
        match self {
            Tokenizer::Whitespace(_) => None,
            Tokenizer::Bpe { vocab, .. } => Some(vocab),
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let norm = normalize_text(text, self.normalization());
        match self {
            Tokenizer::Whitespace(_) => norm.split(' ').filter(|w| !w.is_empty()).map(str::to_string).collect(),
            Tokenizer::Bpe { vocab, .. } => norm
                .split(' ')
                .filter(|w| !w.is_empty())
                .flat_map(|w| vocab.encode_word(w))
                .collect(),
        }
    }

    /// Identifies the tokenizer for index compatibility checks.
    pub fn fingerprint(&self) -> String {
        let mut fp = crate::fingerprint::Fingerprinter::new();
        let n = self.normalization();
        fp.str(&serde_json::to_string(n).expect("config serializes"));
        match self {
            Tokenizer::Whitespace(_) => fp.str("whitespace"),
            Tokenizer::Bpe { vocab, .. } => fp.str("bpe").str(&vocab.fingerprint()),
        };
        fp.finish()
    }
}

/// Normalize, then split each word with the trained merges.
pub fn tokenize(text: &str, vocab: &BpeVocab, cfg: &NormalizationConfig) -> Vec<String> {
    normalize_text(text, cfg)
        .split(' ')
        .filter(|w| !w.is_empty())
        .flat_map(|w| vocab.encode_word(w))
        .collect()
}
