use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::templates::TemplateName;
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;
use crate::http::JsonClient;

/// Cache and fixture key for one filled prompt.
pub fn input_hash(template: TemplateName, filled_prompt: &str) -> String {
    sha256_hex(format!("{}\n{}", template.as_str(), filled_prompt).as_bytes())
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, template: TemplateName, filled_prompt: &str) -> Result<String>;
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    template_name: &'a str,
    filled_prompt: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

/// Client for `POST /generate`.
#[derive(Debug, Clone)]
pub struct ServiceGenerator {
    client: JsonClient,
}

impl ServiceGenerator {
    pub fn new(endpoint: &str) -> Result<Self> {
        Ok(Self {
            client: JsonClient::new(endpoint)?,
        })
    }
}

impl TextGenerator for ServiceGenerator {
    fn generate(&self, template: TemplateName, filled_prompt: &str) -> Result<String> {
        let resp: GenerateResponse = self.client.post(
            "/generate",
            &GenerateRequest {
                template_name: template.as_str(),
                filled_prompt,
            },
        )?;
        Ok(resp.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub input_hash: String,
    pub text: String,
}

/// Replays recorded generations keyed by [`input_hash`].
#[derive(Debug, Clone, Default)]
pub struct CannedGenerator {
    outputs: HashMap<String, String>,
}

impl CannedGenerator {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        Self {
            outputs: entries.into_iter().map(|e| (e.input_hash, e.text)).collect(),
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn write<W: Write>(entries: &[FixtureEntry], mut out: W) -> std::io::Result<()> {
        for e in entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl TextGenerator for CannedGenerator {
    fn generate(&self, template: TemplateName, filled_prompt: &str) -> Result<String> {
        let hash = input_hash(template, filled_prompt);
        self.outputs
            .get(&hash)
            .cloned()
            .ok_or_else(|| Error::MissingFixture {
                template: template.to_string(),
                hash,
            })
    }
}

/// Memoizes another generator per (template, input hash), so repeated calls
/// return the first answer.
pub struct CachedGenerator<G> {
    inner: G,
    cache: Mutex<HashMap<(TemplateName, String), String>>,
}

impl<G: TextGenerator> CachedGenerator<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<G: TextGenerator> TextGenerator for CachedGenerator<G> {
    fn generate(&self, template: TemplateName, filled_prompt: &str) -> Result<String> {
        let key = (template, input_hash(template, filled_prompt));
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let text = self.inner.generate(template, filled_prompt)?;
        Ok(self.cache.lock().unwrap().entry(key).or_insert(text).clone())
    }
}

impl TextGenerator for Box<dyn TextGenerator> {
    fn generate(&self, template: TemplateName, filled_prompt: &str) -> Result<String> {
        (**self).generate(template, filled_prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl TextGenerator for Counting {
        fn generate(&self, _: TemplateName, _: &str) -> Result<String> {
            let n = self.0.fetch_add(1, Ordering::SeqCst);
            Ok(format!("answer {n}"))
        }
    }

    #[test]
    fn cache_returns_first_answer() {
        let g = CachedGenerator::new(Counting(AtomicUsize::new(0)));
        let a = g.generate(TemplateName::Rewrite, "p").unwrap();
        let b = g.generate(TemplateName::Rewrite, "p").unwrap();
        let c = g.generate(TemplateName::Expand, "p").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(g.inner.0.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn canned_miss_names_the_hash() {
        let g = CannedGenerator::default();
        match g.generate(TemplateName::Hyde, "prompt") {
            Err(Error::MissingFixture { hash, .. }) => {
                assert_eq!(hash, input_hash(TemplateName::Hyde, "prompt"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fixture_file_round_trip() {
        let entries = vec![FixtureEntry {
            input_hash: input_hash(TemplateName::Rewrite, "x"),
            text: "y".into(),
        }];
        let mut f = tempfile::NamedTempFile::new().unwrap();
        CannedGenerator::write(&entries, &mut f).unwrap();
        let g = CannedGenerator::open(f.path()).unwrap();
        assert_eq!(g.generate(TemplateName::Rewrite, "x").unwrap(), "y");
    }
}
