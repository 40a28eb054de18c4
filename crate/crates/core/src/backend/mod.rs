//! Access to language-model services: text completion, token log-probability
//! scoring and sentence embeddings.
//!
//! Two families of implementations exist: [`http::OpenAiClient`] speaks the
//! OpenAI-compatible HTTP protocol exposed by most local inference servers,
//! and the types in [`mock`] are pure functions of `(seed, input)` used for
//! offline runs and tests.

pub mod http;
pub mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    PolicyBase,
    PolicyTrained,
    Simulator,
    Scorer,
    Embedder,
    Judge,
}

impl Role {
    pub fn is_generation(self) -> bool {
        matches!(
            self,
            Role::PolicyBase | Role::PolicyTrained | Role::Simulator | Role::Judge
        )
    }

    pub fn default_temperature(self) -> f64 {
        match self {
            Role::PolicyBase | Role::PolicyTrained | Role::Judge => 0.7,
            Role::Simulator | Role::Scorer | Role::Embedder => 0.0,
        }
    }
}

pub const DEFAULT_API_KEY_ENV: &str = "PLOTSEARCH_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub role: Role,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub retries: u32,
    /// Base delay for exponential backoff between attempts.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_backoff_ms() -> u64 {
    250
}

impl BackendConfig {
    pub fn new(role: Role, endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            role,
            temperature: role.default_temperature(),
            max_tokens: 512,
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff_ms: default_backoff_ms(),
            api_key_env: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} must be non-negative",
                self.temperature
            )));
        }
        if self.role == Role::Simulator && self.temperature != 0.0 {
            return Err(BackendError::InvalidRequest(
                "simulator role requires temperature 0.0".into(),
            ));
        }
        if self.retries == 0 {
            return Err(BackendError::InvalidRequest("retries must be >= 1".into()));
        }
        Ok(())
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// One token of the backend's tokenization with its natural-log probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub trait Generator: Send + Sync {
    /// `n` completions of `prompt`.
    fn complete(&self, prompt: &str, n: usize) -> Result<Vec<String>, BackendError>;
}

pub trait TokenScorer: Send + Sync {
    fn score_tokens(&self, text: &str) -> Result<Vec<TokenLogprob>, BackendError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, BackendError>;
}

pub(crate) fn check_completion_request(n: usize) -> Result<(), BackendError> {
    if n == 0 {
        return Err(BackendError::InvalidRequest("n must be >= 1".into()));
    }
    Ok(())
}

pub(crate) fn check_score_request(text: &str) -> Result<(), BackendError> {
    if text.is_empty() {
        return Err(BackendError::InvalidRequest(
            "cannot score empty text".into(),
        ));
    }
    Ok(())
}

pub(crate) fn check_embeddings(
    expected: usize,
    vectors: &[EmbeddingVector],
) -> Result<(), BackendError> {
    if vectors.len() != expected {
        return Err(BackendError::Malformed(format!(
            "expected {expected} embeddings, got {}",
            vectors.len()
        )));
    }
    if let Some(first) = vectors.first() {
        let dim = first.dimension();
        if vectors.iter().any(|v| v.dimension() != dim) {
            return Err(BackendError::Malformed(
                "embedding dimension mismatch within batch".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_defaults() {
        assert_eq!(
            BackendConfig::new(Role::PolicyBase, "x", "m").temperature,
            0.7
        );
        assert_eq!(
            BackendConfig::new(Role::Simulator, "x", "m").temperature,
            0.0
        );
        let mut sim = BackendConfig::new(Role::Simulator, "x", "m");
        assert!(sim.validate().is_ok());
        sim.temperature = 0.7;
        assert!(sim.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_detected() {
        let vs = vec![
            EmbeddingVector {
                values: vec![1.0, 0.0],
            },
            EmbeddingVector { values: vec![1.0] },
        ];
        assert!(check_embeddings(2, &vs).is_err());
        assert!(check_embeddings(3, &vs[..1]).is_err());
    }
}
