//! Thin JSON-over-HTTP client shared by the model-server and generator clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Environment variable naming the model-server base URL.
pub const MODEL_SERVER_ENV: &str = "SCISOURCE_MODEL_SERVER";

#[derive(Debug, Clone)]
pub struct JsonClient {
    base: String,
    client: reqwest::blocking::Client,
}

impl JsonClient {
    pub fn new(base: &str) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| Error::Provider {
                endpoint: base.to_string(),
                message: e.to_string(),
            })?;
        Ok(Self {
            base: base.trim_end_matches('/').to_string(),
            client,
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base, path.trim_start_matches('/'))
    }

    fn fail(&self, url: &str, message: impl ToString) -> Error {
        Error::Provider {
            endpoint: url.to_string(),
            message: message.to_string(),
        }
    }

    fn decode<T: DeserializeOwned>(&self, url: &str, resp: reqwest::blocking::Response) -> Result<T> {
        let status = resp.status();
        let body = resp.text().map_err(|e| self.fail(url, e))?;
        if !status.is_success() {
            return Err(self.fail(url, format!("HTTP {status}: {body}")));
        }
        serde_json::from_str(&body).map_err(|e| self.fail(url, format!("bad response body: {e}")))
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = self.url(path);
        let resp = self.client.get(&url).send().map_err(|e| self.fail(&url, e))?;
        self.decode(&url, resp)
    }

    pub fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = self.url(path);
        let resp = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| self.fail(&url, e))?;
        self.decode(&url, resp)
    }
}
