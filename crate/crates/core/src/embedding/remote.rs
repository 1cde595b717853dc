//! HTTP client for an external embedding service.
//!
//! Protocol: `POST {base}/v1/embed` with
//! `{"texts": [...], "layer": n, "pooling": "mean_all"|"mean_span", "spans": [[s, e], ...]}`.
//! A 2xx reply carries `{"dim": d, "vectors": [[...], ...]}`, one row per text in
//! request order. A reply may instead declare `"pooled": "client"` and send
//! per-word `"token_vectors"`, in which case pooling happens here. Non-2xx
//! replies carry `{"error": "..."}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedInput, Embedder, Pooling};
use crate::error::{Error, Result};

pub const EMBED_PATH: &str = "/v1/embed";
const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WirePooling {
    #[serde(rename = "mean_all")]
    MeanAll,
    #[serde(rename = "mean_span")]
    MeanSpan,
}

impl From<Pooling> for WirePooling {
    fn from(p: Pooling) -> Self {
        match p {
            Pooling::AllTokens => WirePooling::MeanAll,
            Pooling::DescriptorOnly => WirePooling::MeanSpan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    pub layer: u32,
    pub pooling: WirePooling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PooledBy {
    #[default]
    Server,
    Client,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    #[serde(default)]
    pub vectors: Vec<Vec<f64>>,
    #[serde(default)]
    pub pooled: PooledBy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_vectors: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Blocking client; one round trip per [`Embedder::embed`] call.
///
/// The agent is shareable, so several threads may embed concurrently.
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    endpoint: String,
    layer: u32,
    pooling: Pooling,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, layer: u32, pooling: Pooling, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: format!("{}{}", base_url.trim_end_matches('/'), EMBED_PATH),
            layer,
            pooling,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn request(&self, inputs: &[EmbedInput]) -> EmbedRequest {
        let spans = (self.pooling == Pooling::DescriptorOnly).then(|| {
            inputs
                .iter()
                .map(|i| {
                    let (s, e) = i.span.unwrap_or((0, i.text.split_whitespace().count()));
                    [s, e]
                })
                .collect()
        });
        EmbedRequest {
            texts: inputs.iter().map(|i| i.text.clone()).collect(),
            layer: self.layer,
            pooling: self.pooling.into(),
            spans,
        }
    }
}

fn backend(status: Option<u16>, message: impl Into<String>) -> Error {
    Error::Backend {
        status,
        message: message.into(),
    }
}

/// Reduce a client-pooled reply to one row per text.
fn pool_tokens(
    token_vectors: Vec<Vec<Vec<f64>>>,
    inputs: &[EmbedInput],
    pooling: Pooling,
    dim: usize,
) -> Result<Vec<Vec<f64>>> {
    token_vectors
        .into_iter()
        .zip(inputs)
        .map(|(tokens, input)| {
            let (s, e) = match (pooling, input.span) {
                (Pooling::DescriptorOnly, Some(span)) => span,
                _ => (0, tokens.len()),
            };
            let chosen = tokens.get(s..e).filter(|c| !c.is_empty()).ok_or_else(|| {
                Error::Integrity(format!("no token vectors to pool for {:?}", input.text))
            })?;
            let mut acc = vec![0.0; dim];
            for t in chosen {
                if t.len() != dim {
                    return Err(Error::Integrity(format!(
                        "token vector of length {} under dim {dim}",
                        t.len()
                    )));
                }
                for (a, v) in acc.iter_mut().zip(t) {
                    *a += v;
                }
            }
            let n = chosen.len() as f64;
            Ok(acc.into_iter().map(|a| a / n).collect())
        })
        .collect()
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let req = self.request(inputs);
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&req)
            .map_err(|e| backend(None, format!("{}: {e}", self.endpoint)))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_string()
            .map_err(|e| backend(Some(status), format!("reading body: {e}")))?;
        if !(200..300).contains(&status) {
            let message = serde_json::from_str::<ErrorBody>(&body)
                .map(|b| b.error)
                .unwrap_or(body);
            return Err(backend(Some(status), message));
        }
        let reply: EmbedResponse = serde_json::from_str(&body)
            .map_err(|e| backend(Some(status), format!("malformed reply: {e}")))?;

        let rows = match reply.pooled {
            PooledBy::Server => reply.vectors,
            PooledBy::Client => {
                let tokens = reply.token_vectors.ok_or_else(|| {
                    Error::Integrity("client pooling declared without token_vectors".into())
                })?;
                if tokens.len() != inputs.len() {
                    return Err(Error::Integrity(format!(
                        "{} token groups for {} texts",
                        tokens.len(),
                        inputs.len()
                    )));
                }
                pool_tokens(tokens, inputs, self.pooling, reply.dim)?
            }
        };
        if rows.len() != inputs.len() {
            return Err(Error::Integrity(format!(
                "service returned {} vectors for {} texts",
                rows.len(),
                inputs.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != reply.dim) {
            return Err(Error::Integrity(format!(
                "vector of length {} in a reply declaring dim {}",
                bad.len(),
                reply.dim
            )));
        }
        Ok(rows)
    }
}
