//! Language-model transport: a synchronous backend trait, request/response
//! types, and a client with bounded fan-out for batch completion.
//!
//! Backends are interchangeable; the engine is written against the mock in
//! tests and swaps in the HTTP backend for real runs without code changes.

pub mod http;
pub mod mock;
pub mod parse;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompts::{PromptBundle, PromptPurpose};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// Decoding parameters shared by every engine request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 0.7,
            top_p: 0.95,
        }
    }
}

/// One completion call. `purpose` and `hints` are engine-side metadata:
/// they never leave the process (the HTTP backend ignores them) but let
/// deterministic mock responders answer sensibly.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    pub n_completions: usize,
    /// Distinguishes otherwise-identical requests so a deterministic mock
    /// still produces diverse completions (mirrors temperature sampling).
    pub seed: u64,
    pub purpose: Option<PromptPurpose>,
    pub hints: crate::prompts::PromptHints,
}

impl CompletionRequest {
    pub fn new(messages: Vec<Message>, temperature: f64, top_p: f64, n: usize) -> Self {
        CompletionRequest {
            messages,
            temperature,
            top_p,
            n_completions: n,
            seed: 0,
            purpose: None,
            hints: Default::default(),
        }
    }

    pub fn from_bundle(bundle: &PromptBundle, params: &GenParams, n: usize, seed: u64) -> Self {
        CompletionRequest {
            messages: bundle
                .messages()
                .into_iter()
                .map(|m| Message {
                    role: m.role.to_string(),
                    content: m.content,
                })
                .collect(),
            temperature: params.temperature,
            top_p: params.top_p,
            n_completions: n,
            seed,
            purpose: Some(bundle.purpose),
            hints: bundle.hints.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("empty message list".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::InvalidRequest(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if self.n_completions == 0 {
            return Err(LlmError::InvalidRequest("n_completions must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Content digest over the (role, content) message sequence,
    /// length-prefixed so distinct sequences cannot collide. Keys scripted
    /// mock fixtures and tags transport errors.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for m in &self.messages {
            hasher.update((m.role.len() as u64).to_le_bytes());
            hasher.update(m.role.as_bytes());
            hasher.update((m.content.len() as u64).to_le_bytes());
            hasher.update(m.content.as_bytes());
        }
        let out = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in out {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResponse {
    /// One entry per requested completion.
    pub texts: Vec<String>,
    pub wallclock_ms: u64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("missing API credential: set the `{0}` environment variable")]
    MissingCredential(String),
    #[error("transport failure after {attempts} attempt(s) (request {digest}): {message}")]
    Transport {
        digest: String,
        attempts: u32,
        message: String,
    },
    #[error("protocol error (request {digest}): {message}")]
    Protocol { digest: String, message: String },
}

/// A synchronous completion backend. Implementations must be shareable
/// across worker threads.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError>;
    /// Stable identifier recorded in run logs.
    fn id(&self) -> String;
    /// True when identical requests always yield identical responses.
    fn deterministic(&self) -> bool;
}

/// Fans batches of requests over a fixed-size thread pool. Results come
/// back in request order regardless of completion order.
pub struct LlmClient {
    backend: Arc<dyn LlmBackend>,
    parallelism: usize,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn LlmBackend>, parallelism: usize) -> Self {
        LlmClient {
            backend,
            parallelism: parallelism.max(1),
        }
    }

    pub fn backend(&self) -> &Arc<dyn LlmBackend> {
        &self.backend
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        self.backend.complete(req)
    }

    pub fn complete_many(
        &self,
        reqs: &[CompletionRequest],
    ) -> Vec<Result<CompletionResponse, LlmError>> {
        if reqs.is_empty() {
            return Vec::new();
        }
        let workers = self.parallelism.min(reqs.len());
        if workers == 1 {
            return reqs.iter().map(|r| self.complete(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= reqs.len() {
                        break;
                    }
                    let res = self.complete(&reqs[i]);
                    if tx.send((i, res)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);
        let mut out: Vec<Option<Result<CompletionResponse, LlmError>>> =
            (0..reqs.len()).map(|_| None).collect();
        for (i, res) in rx {
            out[i] = Some(res);
        }
        out.into_iter()
            .map(|slot| slot.expect("every request produces a result"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    fn req(content: &str) -> CompletionRequest {
        CompletionRequest::new(
            vec![Message {
                role: "user".into(),
                content: content.into(),
            }],
            0.7,
            0.95,
            1,
        )
    }

    struct Echo {
        calls: AtomicU32,
    }

    impl LlmBackend for Echo {
        fn complete(&self, r: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            Ok(CompletionResponse {
                texts: vec![r.messages[0].content.clone(); r.n_completions],
                wallclock_ms: 0,
            })
        }
        fn id(&self) -> String {
            "echo".into()
        }
        fn deterministic(&self) -> bool {
            true
        }
    }

    #[test]
    fn digest_is_stable_and_collision_shy() {
        let a = req("hello").digest();
        assert_eq!(a.len(), 64);
        assert_eq!(a, req("hello").digest());
        assert_ne!(a, req("hello ").digest());
        // Length prefixing keeps shifted boundaries apart.
        let m1 = CompletionRequest::new(
            vec![
                Message {
                    role: "user".into(),
                    content: "ab".into(),
                },
                Message {
                    role: "user".into(),
                    content: "c".into(),
                },
            ],
            0.7,
            0.95,
            1,
        );
        let m2 = CompletionRequest::new(
            vec![
                Message {
                    role: "user".into(),
                    content: "a".into(),
                },
                Message {
                    role: "user".into(),
                    content: "bc".into(),
                },
            ],
            0.7,
            0.95,
            1,
        );
        assert_ne!(m1.digest(), m2.digest());
    }

    #[test]
    fn request_validation() {
        assert!(req("x").validate().is_ok());
        let mut r = req("x");
        r.temperature = 2.5;
        assert!(r.validate().is_err());
        let mut r = req("x");
        r.top_p = 0.0;
        assert!(r.validate().is_err());
        let mut r = req("x");
        r.n_completions = 0;
        assert!(r.validate().is_err());
        let r = CompletionRequest::new(vec![], 0.7, 0.95, 1);
        assert!(r.validate().is_err());
    }

    #[test]
    fn fan_out_preserves_request_order() {
        let backend = Arc::new(Echo {
            calls: AtomicU32::new(0),
        });
        let client = LlmClient::new(backend.clone(), 4);
        let reqs: Vec<CompletionRequest> = (0..37).map(|i| req(&format!("msg-{i}"))).collect();
        let results = client.complete_many(&reqs);
        assert_eq!(results.len(), 37);
        for (i, res) in results.iter().enumerate() {
            assert_eq!(res.as_ref().unwrap().texts[0], format!("msg-{i}"));
        }
        assert_eq!(backend.calls.load(Ordering::Relaxed), 37);
    }

    #[test]
    fn fan_out_reports_per_request_errors() {
        struct FailOdd;
        impl LlmBackend for FailOdd {
            fn complete(&self, r: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
                let i: u32 = r.messages[0].content.parse().unwrap();
                if i % 2 == 1 {
                    Err(LlmError::Protocol {
                        digest: r.digest(),
                        message: "odd".into(),
                    })
                } else {
                    Ok(CompletionResponse {
                        texts: vec!["ok".into()],
                        wallclock_ms: 0,
                    })
                }
            }
            fn id(&self) -> String {
                "fail-odd".into()
            }
            fn deterministic(&self) -> bool {
                true
            }
        }
        let client = LlmClient::new(Arc::new(FailOdd), 3);
        let reqs: Vec<CompletionRequest> = (0..10).map(|i| req(&i.to_string())).collect();
        let results = client.complete_many(&reqs);
        for (i, res) in results.iter().enumerate() {
            assert_eq!(res.is_err(), i % 2 == 1, "slot {i}");
        }
    }
}
