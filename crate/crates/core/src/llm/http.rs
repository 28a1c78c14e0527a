//! OpenAI-compatible chat-completions backend over blocking HTTP.
//!
//! The API key comes from an environment variable, never from config
//! files, and is read at construction so a missing credential fails before
//! any network traffic. Rate limits (429), server errors (5xx), and
//! connection failures retry with exponential backoff; other error
//! statuses fail immediately.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, LlmBackend, LlmError};

pub const DEFAULT_API_KEY_ENV: &str = "LLAMBO_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub retry_base_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
            max_attempts: 5,
            retry_base_ms: 250,
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    top_p: f64,
    n: usize,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

/// The credential never appears in debug output.
impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::MissingCredential(config.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport {
                digest: String::new(),
                attempts: 0,
                message: format!("building HTTP client: {e}"),
            })?;
        Ok(HttpBackend {
            config,
            api_key,
            client,
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.config.retry_base_ms.saturating_mul(1u64 << attempt.min(16)))
    }
}

fn retryable_status(status: reqwest::StatusCode) -> bool {
    status.as_u16() == 429 || status.is_server_error()
}

impl LlmBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        let digest = req.digest();
        let body = WireRequest {
            model: &self.config.model,
            messages: req
                .messages
                .iter()
                .map(|m| WireMessage {
                    role: &m.role,
                    content: &m.content,
                })
                .collect(),
            temperature: req.temperature,
            top_p: req.top_p,
            n: req.n_completions,
        };
        let started = Instant::now();
        let mut last_failure = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            let sent = self
                .client
                .post(&self.config.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            let response = match sent {
                Ok(r) => r,
                Err(e) => {
                    last_failure = format!("request failed: {e}");
                    log::warn!("attempt {}: {last_failure}", attempt + 1);
                    continue;
                }
            };
            let status = response.status();
            if retryable_status(status) {
                last_failure = format!("status {status}");
                log::warn!("attempt {}: {last_failure}", attempt + 1);
                continue;
            }
            if !status.is_success() {
                let text = response.text().unwrap_or_default();
                return Err(LlmError::Protocol {
                    digest,
                    message: format!("status {status}: {}", text.chars().take(500).collect::<String>()),
                });
            }
            let parsed: WireResponse = response.json().map_err(|e| LlmError::Protocol {
                digest: digest.clone(),
                message: format!("malformed response body: {e}"),
            })?;
            if parsed.choices.is_empty() {
                return Err(LlmError::Protocol {
                    digest,
                    message: "response contains no choices".into(),
                });
            }
            return Ok(CompletionResponse {
                texts: parsed.choices.into_iter().map(|c| c.message.content).collect(),
                wallclock_ms: started.elapsed().as_millis() as u64,
            });
        }
        Err(LlmError::Transport {
            digest,
            attempts: self.config.max_attempts,
            message: last_failure,
        })
    }

    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn deterministic(&self) -> bool {
        false
    }
}
