//! A small in-process embedding service speaking the remote protocol.
//!
//! Used by tests and for offline runs of the remote code path. Vectors are
//! derived from hashed per-word vectors keyed by the requested layer, so
//! different layers give different (but stable) embeddings.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use super::backends::{gaussian_vector, keyed_rng};
use super::remote::{EmbedRequest, EmbedResponse, ErrorBody, PooledBy, WirePooling, EMBED_PATH};

/// Text that makes the stub answer with HTTP 500.
pub const FAIL_TRIGGER: &str = "__fail__";

#[derive(Debug, Clone)]
pub struct StubBehavior {
    pub dim: usize,
    pub seed: u64,
    /// Exact replies for given texts, bypassing the hashed vectors.
    pub fixtures: HashMap<String, Vec<f64>>,
    /// Reply with per-word vectors and let the client pool.
    pub client_pooling: bool,
    /// Fail every request with this status and message.
    pub fail: Option<(u16, String)>,
    pub delay: Option<Duration>,
}

impl Default for StubBehavior {
    fn default() -> Self {
        Self {
            dim: 8,
            seed: 0,
            fixtures: HashMap::new(),
            client_pooling: false,
            fail: None,
            delay: None,
        }
    }
}

impl StubBehavior {
    fn word_vector(&self, layer: u32, word: &str) -> Vec<f64> {
        let seed = self.seed ^ (u64::from(layer) << 32);
        gaussian_vector(&mut keyed_rng("stub", seed, word), self.dim)
    }

    fn word_vectors(&self, layer: u32, text: &str) -> Vec<Vec<f64>> {
        text.split_whitespace()
            .map(|w| self.word_vector(layer, w))
            .collect()
    }

    pub fn reply(&self, req: &EmbedRequest) -> Result<EmbedResponse, (u16, String)> {
        if let Some(fail) = &self.fail {
            return Err(fail.clone());
        }
        if req.texts.iter().any(|t| t.contains(FAIL_TRIGGER)) {
            return Err((500, "injected failure".into()));
        }
        if let Some(spans) = &req.spans {
            if spans.len() != req.texts.len() {
                return Err((400, "spans length differs from texts".into()));
            }
        }
        if self.client_pooling {
            let tokens = req
                .texts
                .iter()
                .map(|t| self.word_vectors(req.layer, t))
                .collect();
            return Ok(EmbedResponse {
                dim: self.dim,
                vectors: Vec::new(),
                pooled: PooledBy::Client,
                token_vectors: Some(tokens),
            });
        }
        let mut vectors = Vec::with_capacity(req.texts.len());
        for (i, text) in req.texts.iter().enumerate() {
            if let Some(v) = self.fixtures.get(text) {
                vectors.push(v.clone());
                continue;
            }
            let words = self.word_vectors(req.layer, text);
            let (s, e) = match (req.pooling, &req.spans) {
                (WirePooling::MeanSpan, Some(spans)) => (spans[i][0], spans[i][1]),
                _ => (0, words.len()),
            };
            let chosen = match words.get(s..e) {
                Some(c) if !c.is_empty() => c,
                _ => return Err((400, format!("bad span for text {i}"))),
            };
            let mut acc = vec![0.0; self.dim];
            for w in chosen {
                for (a, v) in acc.iter_mut().zip(w) {
                    *a += v;
                }
            }
            vectors.push(acc.into_iter().map(|a| a / chosen.len() as f64).collect());
        }
        Ok(EmbedResponse {
            dim: self.dim,
            vectors,
            pooled: PooledBy::Server,
            token_vectors: None,
        })
    }
}

/// Running stub service bound to an ephemeral localhost port. Stops on drop.
pub struct StubServer {
    url: String,
    shutdown: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    workers: Vec<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(behavior: StubBehavior) -> std::io::Result<Self> {
        Self::start_with_workers(behavior, 4)
    }

    pub fn start_with_workers(behavior: StubBehavior, workers: usize) -> std::io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub not bound to an IP address"))?;
        let server = Arc::new(server);
        let behavior = Arc::new(behavior);
        let shutdown = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let handles = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let behavior = Arc::clone(&behavior);
                let shutdown = Arc::clone(&shutdown);
                let requests = Arc::clone(&requests);
                std::thread::spawn(move || {
                    while !shutdown.load(Ordering::Acquire) {
                        match server.recv_timeout(Duration::from_millis(50)) {
                            Ok(Some(req)) => {
                                requests.fetch_add(1, Ordering::Relaxed);
                                handle(req, &behavior);
                            }
                            Ok(None) => {}
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Ok(Self {
            url: format!("http://{addr}"),
            shutdown,
            requests,
            workers: handles,
        })
    }

    /// Base URL, e.g. `http://127.0.0.1:40123`.
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Release);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header =
        Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header");
    Response::from_string(body)
        .with_status_code(status)
        .with_header(header)
}

fn error_response(status: u16, message: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = serde_json::to_string(&ErrorBody { error: message }).expect("error body");
    json_response(status, body)
}

fn handle(mut req: tiny_http::Request, behavior: &StubBehavior) {
    if let Some(d) = behavior.delay {
        std::thread::sleep(d);
    }
    let response = if req.method() != &Method::Post || req.url() != EMBED_PATH {
        error_response(404, format!("no route for {} {}", req.method(), req.url()))
    } else {
        let mut body = String::new();
        match req.as_reader().read_to_string(&mut body) {
            Err(e) => error_response(400, e.to_string()),
            Ok(_) => match serde_json::from_str::<EmbedRequest>(&body) {
                Err(e) => error_response(400, format!("bad request: {e}")),
                Ok(parsed) => match behavior.reply(&parsed) {
                    Ok(reply) => json_response(200, serde_json::to_string(&reply).expect("reply")),
                    Err((status, message)) => error_response(status, message),
                },
            },
        }
    };
    let _ = req.respond(response);
}
