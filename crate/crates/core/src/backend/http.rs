//! OpenAI-compatible HTTP adapter. Paths are relative to the configured
//! endpoint, which normally ends in `/v1`.
//!
//! - completions: `POST {endpoint}/chat/completions`
//! - token scoring: `POST {endpoint}/completions` with `echo: true,
//!   max_tokens: 0, logprobs: 0`, which returns the log-probability of every
//!   prompt token
//! - embeddings: `POST {endpoint}/embeddings`

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    check_completion_request, check_embeddings, check_score_request, BackendConfig, Embedder,
    EmbeddingVector, Generator, Role, TokenLogprob, TokenScorer, DEFAULT_API_KEY_ENV,
};
use crate::error::BackendError;

pub struct OpenAiClient {
    cfg: BackendConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

enum Attempt {
    Retry(BackendError),
    Fail(BackendError),
}

impl OpenAiClient {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let key_var = cfg
            .api_key_env
            .clone()
            .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string());
        let api_key = std::env::var(key_var).ok().filter(|k| !k.is_empty());
        Ok(Self {
            cfg,
            agent,
            api_key,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.cfg.endpoint.trim_end_matches('/'), path)
    }

    fn require_role(&self, allowed: &[Role], what: &str) -> Result<(), BackendError> {
        if allowed.contains(&self.cfg.role) {
            Ok(())
        } else {
            Err(BackendError::Capability(format!(
                "{what} (configured role is {:?})",
                self.cfg.role
            )))
        }
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Err(Attempt::Retry(BackendError::Timeout { attempts: 0 }))
            }
            Err(e) => {
                return Err(Attempt::Retry(BackendError::Transport {
                    attempts: 0,
                    message: e.to_string(),
                }))
            }
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => Attempt::Retry(BackendError::Timeout { attempts: 0 }),
            e => Attempt::Retry(BackendError::Transport {
                attempts: 0,
                message: e.to_string(),
            }),
        })?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(BackendError::Status { status, body: text }));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fail(BackendError::Status { status, body: text }));
        }
        serde_json::from_str(&text)
            .map_err(|e| Attempt::Fail(BackendError::Malformed(e.to_string())))
    }

    /// POST with exponential backoff; gives up after `retries` attempts.
    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = self.url(path);
        let mut last = None;
        for attempt in 1..=self.cfg.retries {
            match self.post_once(&url, body) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("{url}: attempt {attempt}/{} failed: {e}", self.cfg.retries);
                    last = Some(e);
                    if attempt < self.cfg.retries {
                        let delay = self
                            .cfg
                            .backoff_ms
                            .saturating_mul(1 << (attempt - 1).min(16));
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
        let attempts = self.cfg.retries;
        Err(match last {
            Some(BackendError::Timeout { .. }) => BackendError::Timeout { attempts },
            Some(BackendError::Transport { message, .. }) => {
                BackendError::Transport { attempts, message }
            }
            Some(other) => other,
            None => BackendError::Transport {
                attempts,
                message: "no attempt made".into(),
            },
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EchoResponse {
    choices: Vec<EchoChoice>,
}

#[derive(Deserialize)]
struct EchoChoice {
    logprobs: Option<EchoLogprobs>,
}

#[derive(Deserialize)]
struct EchoLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: usize,
    embedding: Vec<f64>,
}

fn decode<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, BackendError> {
    serde_json::from_value(v).map_err(|e| BackendError::Malformed(e.to_string()))
}

impl Generator for OpenAiClient {
    fn complete(&self, prompt: &str, n: usize) -> Result<Vec<String>, BackendError> {
        check_completion_request(n)?;
        self.require_role(
            &[
                Role::PolicyBase,
                Role::PolicyTrained,
                Role::Simulator,
                Role::Judge,
            ],
            "text completion",
        )?;
        let mut out = Vec::with_capacity(n);
        // servers without `n` support return a single choice; keep asking
        while out.len() < n {
            let body = json!({
                "model": self.cfg.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": self.cfg.temperature,
                "max_tokens": self.cfg.max_tokens,
                "n": n - out.len(),
            });
            let resp: ChatResponse = decode(self.post("/chat/completions", &body)?)?;
            if resp.choices.is_empty() {
                return Err(BackendError::Malformed("response has no choices".into()));
            }
            for choice in resp.choices.into_iter().take(n - out.len()) {
                out.push(choice.message.content.ok_or_else(|| {
                    BackendError::Malformed("choice without message content".into())
                })?);
            }
        }
        Ok(out)
    }
}

impl TokenScorer for OpenAiClient {
    /// Tokens the server reports without a log-probability (typically the
    /// first one, which has no context) are dropped.
    fn score_tokens(&self, text: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        check_score_request(text)?;
        self.require_role(&[Role::Scorer], "token log-probabilities")?;
        let body = json!({
            "model": self.cfg.model,
            "prompt": text,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
            "temperature": 0.0,
        });
        let resp: EchoResponse = decode(self.post("/completions", &body)?)?;
        let lp = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Malformed("response has no choices".into()))?
            .logprobs
            .ok_or_else(|| BackendError::Capability("prompt log-probabilities".into()))?;
        if lp.tokens.len() != lp.token_logprobs.len() {
            return Err(BackendError::Malformed(
                "tokens and token_logprobs differ in length".into(),
            ));
        }
        let mut out = Vec::with_capacity(lp.tokens.len());
        let mut dropped = 0usize;
        for (token, logprob) in lp.tokens.into_iter().zip(lp.token_logprobs) {
            match logprob {
                Some(l) if l <= 0.0 && l.is_finite() => {
                    out.push(TokenLogprob { token, logprob: l })
                }
                Some(l) => {
                    return Err(BackendError::Malformed(format!(
                        "invalid log-probability {l} for token {token:?}"
                    )))
                }
                None => dropped += 1,
            }
        }
        if dropped > 0 {
            log::debug!("dropped {dropped} token(s) without log-probability");
        }
        Ok(out)
    }
}

impl Embedder for OpenAiClient {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        if sentences.is_empty() {
            return Err(BackendError::InvalidRequest("no sentences to embed".into()));
        }
        self.require_role(&[Role::Embedder], "embeddings")?;
        let body = json!({ "model": self.cfg.model, "input": sentences });
        let mut resp: EmbeddingResponse = decode(self.post("/embeddings", &body)?)?;
        resp.data.sort_by_key(|d| d.index);
        let vectors: Vec<EmbeddingVector> = resp
            .data
            .into_iter()
            .map(|d| EmbeddingVector {
                values: d.embedding,
            })
            .collect();
        check_embeddings(sentences.len(), &vectors)?;
        Ok(vectors)
    }
}
