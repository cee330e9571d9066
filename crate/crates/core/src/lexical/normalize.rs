use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HashtagPolicy {
    /// Drop the `#` and keep the word body.
    #[default]
    StripMarker,
    /// Drop the whole hashtag.
    DropToken,
    /// Leave hashtags alone.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub preserved_symbols: Vec<char>,
    pub hashtag_policy: HashtagPolicy,
    pub strip_urls: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            preserved_symbols: vec!['%'],
            hashtag_policy: HashtagPolicy::StripMarker,
            strip_urls: true,
        }
    }
}

impl NormalizationConfig {
    /// No normalization beyond whitespace collapsing.
    pub fn raw() -> Self {
        Self {
            lowercase: false,
            strip_punctuation: false,
            preserved_symbols: Vec::new(),
            hashtag_policy: HashtagPolicy::Keep,
            strip_urls: false,
        }
    }

    fn keeps(&self, c: char) -> bool {
        c.is_alphanumeric() || c.is_whitespace() || self.preserved_symbols.contains(&c)
    }
}

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#+(\w+)").unwrap());

/// Normalize raw text for lexical matching.
///
/// URLs go first, then hashtags, then case folding, then every character that is
/// neither alphanumeric, whitespace nor a preserved symbol. Whitespace runs
/// collapse to single spaces. Idempotent.
pub fn normalize_text(raw: &str, cfg: &NormalizationConfig) -> String {
    let mut text = raw.to_string();
    if cfg.strip_urls && URL.is_match(&text) {
        text = URL.replace_all(&text, " ").into_owned();
    }
    let replacement = match cfg.hashtag_policy {
        HashtagPolicy::DropToken => Some(" "),
        HashtagPolicy::StripMarker => Some("$1"),
        HashtagPolicy::Keep => None,
    };
    if let Some(r) = replacement.filter(|_| text.contains('#')) {
        text = HASHTAG.replace_all(&text, r).into_owned();
    }
    let lowered;
    let text: &str = if cfg.lowercase {
        lowered = text.to_lowercase();
        &lowered
    } else {
        &text
    };
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if cfg.strip_punctuation && !cfg.keeps(c) {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn percent_survives() {
        let cfg = NormalizationConfig::default();
        assert_eq!(
            normalize_text("Game changer!! 45% improvement", &cfg),
            "game changer 45% improvement"
        );
    }

    #[test]
    fn empty_is_empty() {
        assert_eq!(normalize_text("", &NormalizationConfig::default()), "");
        assert_eq!(normalize_text("  \t\n ", &NormalizationConfig::default()), "");
    }

    #[test]
    fn hashtag_and_url() {
        let cfg = NormalizationConfig::default();
        assert_eq!(
            normalize_text("#Alzheimers study http://t.co/x", &cfg),
            "alzheimers study"
        );
        let drop = NormalizationConfig {
            hashtag_policy: HashtagPolicy::DropToken,
            ..cfg
        };
        assert_eq!(normalize_text("#Alzheimers study http://t.co/x", &drop), "study");
    }

    #[test]
    fn url_kept_when_disabled() {
        let cfg = NormalizationConfig {
            strip_urls: false,
            ..Default::default()
        };
        assert_eq!(normalize_text("see https://t.co/x", &cfg), "see httpstcox");
    }

    #[test]
    fn strip_marker_without_punctuation_removal() {
        let cfg = NormalizationConfig {
            strip_punctuation: false,
            ..Default::default()
        };
        assert_eq!(normalize_text("#COVID19 news!", &cfg), "covid19 news!");
    }

    #[test]
    fn raw_only_collapses_whitespace() {
        assert_eq!(
            normalize_text("  Mice   w/ #AD\n", &NormalizationConfig::raw()),
            "Mice w/ #AD"
        );
    }

    #[test]
    fn digits_and_unicode_letters_kept() {
        let cfg = NormalizationConfig::default();
        assert_eq!(normalize_text("SARS-CoV-2 (Ürün) – 3×", &cfg), "sarscov2 ürün 3");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,80}", drop in any::<bool>(), urls in any::<bool>()) {
            let cfg = NormalizationConfig {
                hashtag_policy: if drop { HashtagPolicy::DropToken } else { HashtagPolicy::StripMarker },
                strip_urls: urls,
                ..Default::default()
            };
            let once = normalize_text(&s, &cfg);
            prop_assert_eq!(normalize_text(&once, &cfg), once);
        }

        #[test]
        fn idempotent_on_tweetish_text(s in "[a-zA-Z#%:/. !?0-9-]{0,60}") {
            let cfg = NormalizationConfig::default();
            let once = normalize_text(&s, &cfg);
            prop_assert_eq!(normalize_text(&once, &cfg), once);
        }
    }
}
