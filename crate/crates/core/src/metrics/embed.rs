use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Maps texts to vectors, one per input, all of the same length.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, String>;
}

/// Client for an embedding service at `{endpoint}/v1/embed`.
pub struct HttpEmbedder {
    endpoint: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        HttpEmbedder {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, String> {
        let url = format!("{}/v1/embed", self.endpoint);
        let resp = self
            .agent
            .post(&url)
            .send_json(EmbedRequest { texts })
            .map_err(|e| format!("{url}: {e}"))?;
        let body: EmbedResponse = resp.into_json().map_err(|e| format!("{url}: bad response body: {e}"))?;
        if body.vectors.len() != texts.len() {
            return Err(format!("{url}: {} vectors for {} texts", body.vectors.len(), texts.len()));
        }
        Ok(body.vectors)
    }
}
