//! TOML run configuration and backend construction.
//!
//! ```toml
//! seed = 7
//!
//! [story]
//! bullets_per_step = 4
//! max_depth = 8
//!
//! [search]
//! max_iterations = 20
//! exploration = 1.414
//!
//! [backends.policy_base]
//! kind = "openai"
//! endpoint = "http://localhost:8000/v1"
//! model = "llama-3.2-3b-instruct"
//!
//! [backends.simulator]
//! kind = "mock"
//!
//! [value]
//! model = "value_model.json"
//!
//! [miner]
//! min_delta_q = 0.02
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::http::OpenAiClient;
use crate::backend::mock::{MockEmbedder, MockGenerator, MockKind, MockScorer};
use crate::backend::{BackendConfig, Embedder, Generator, Role, TokenScorer};
use crate::error::{Error, Result};
use crate::hash::combine;
use crate::prefs::MinerConfig;
use crate::search::SearchConfig;
use crate::tree::StoryConfig;
use crate::value::features::FeatureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoryShape {
    pub bullets_per_step: usize,
    pub max_depth: usize,
}

impl Default for StoryShape {
    fn default() -> Self {
        let d = StoryConfig::default();
        Self {
            bullets_per_step: d.bullets_per_step,
            max_depth: d.max_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenAiSpec {
    pub endpoint: String,
    pub model: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Mock {
        #[serde(default)]
        seed: u64,
    },
    Openai(OpenAiSpec),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Mock { seed: 0 }
    }
}

impl BackendSpec {
    pub fn backend_config(&self, role: Role) -> Option<Result<BackendConfig>> {
        let BackendSpec::Openai(spec) = self else {
            return None;
        };
        let mut cfg = BackendConfig::new(role, spec.endpoint.clone(), spec.model.clone());
        if let Some(t) = spec.temperature {
            cfg.temperature = t;
        }
        if let Some(m) = spec.max_tokens {
            cfg.max_tokens = m;
        }
        if let Some(r) = spec.retries {
            cfg.retries = r;
        }
        if let Some(b) = spec.backoff_ms {
            cfg.backoff_ms = b;
        }
        cfg.api_key_env.clone_from(&spec.api_key_env);
        if let Some(t) = spec.timeout_secs {
            match Duration::try_from_secs_f64(t) {
                Ok(d) => cfg.timeout = d,
                Err(e) => return Some(Err(Error::Config(format!("timeout_secs: {e}")))),
            }
        }
        Some(cfg.validate().map(|_| cfg).map_err(Error::from))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Backends {
    pub policy_base: BackendSpec,
    pub policy_trained: Option<BackendSpec>,
    pub simulator: BackendSpec,
    pub scorer: BackendSpec,
    pub embedder: BackendSpec,
    pub judge: BackendSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValueSection {
    /// Trained value model; relative paths resolve against the config file.
    pub model: Option<PathBuf>,
    pub features: FeatureConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub story: StoryShape,
    pub search: SearchConfig,
    pub backends: Backends,
    pub value: ValueSection,
    pub miner: MinerConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(model), Some(dir)) = (&cfg.value.model, path.parent()) {
            if model.is_relative() {
                cfg.value.model = Some(dir.join(model));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.story_config()?;
        self.search.validate()?;
        self.miner.validate()?;
        self.value.features.curiosity.validate()?;
        let b = &self.backends;
        let roles = [
            (Some(&b.policy_base), Role::PolicyBase),
            (b.policy_trained.as_ref(), Role::PolicyTrained),
            (Some(&b.simulator), Role::Simulator),
            (Some(&b.scorer), Role::Scorer),
            (Some(&b.embedder), Role::Embedder),
            (Some(&b.judge), Role::Judge),
        ];
        for (spec, role) in roles {
            if let Some(Some(Err(e))) = spec.map(|s| s.backend_config(role)) {
                return Err(e);
            }
        }
        Ok(())
    }

    pub fn story_config(&self) -> Result<StoryConfig> {
        StoryConfig::new(self.story.bullets_per_step, self.story.max_depth)
    }

    /// Search settings with the run seed applied.
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            seed: self.seed,
            ..self.search
        }
    }

    fn spec(&self, role: Role) -> Option<&BackendSpec> {
        let b = &self.backends;
        match role {
            Role::PolicyBase => Some(&b.policy_base),
            Role::PolicyTrained => b.policy_trained.as_ref(),
            Role::Simulator => Some(&b.simulator),
            Role::Scorer => Some(&b.scorer),
            Role::Embedder => Some(&b.embedder),
            Role::Judge => Some(&b.judge),
        }
    }

    /// Generation backend for a role; `None` when an optional role is unset.
    /// Mock generators mix the run seed into their own seed so that runs with
    /// different seeds explore different actions.
    pub fn generator(&self, role: Role) -> Result<Option<Arc<dyn Generator>>> {
        if !role.is_generation() {
            return Err(Error::Config(format!("{role:?} is not a generation role")));
        }
        let Some(spec) = self.spec(role) else {
            return Ok(None);
        };
        if let Some(cfg) = spec.backend_config(role) {
            return Ok(Some(Arc::new(OpenAiClient::new(cfg?)?)));
        }
        let BackendSpec::Mock { seed } = spec else {
            unreachable!("non-mock specs handled above")
        };
        let salt = match role {
            Role::PolicyTrained => 0x7_2a1d,
            Role::Simulator => 0x51_3a,
            Role::Judge => 0x1_7d6e,
            _ => 0,
        };
        let s = combine(combine(*seed, self.seed), salt);
        let g = match role {
            Role::Simulator => MockGenerator::new(
                s,
                0.0,
                MockKind::Simulator {
                    bullets: self.story.bullets_per_step,
                },
            ),
            Role::Judge => MockGenerator::judge(s),
            _ => MockGenerator::policy(s),
        };
        Ok(Some(Arc::new(g)))
    }

    /// Token scorer. Mock scorers ignore the run seed: they stand for a fixed
    /// language model.
    pub fn scorer(&self) -> Result<Arc<dyn TokenScorer>> {
        let spec = &self.backends.scorer;
        if let Some(cfg) = spec.backend_config(Role::Scorer) {
            return Ok(Arc::new(OpenAiClient::new(cfg?)?));
        }
        let BackendSpec::Mock { seed } = spec else {
            unreachable!("non-mock specs handled above")
        };
        Ok(Arc::new(MockScorer::new(*seed)))
    }

    /// The mock scorer, when the scorer role is mocked.
    pub fn mock_scorer(&self) -> Option<MockScorer> {
        match self.backends.scorer {
            BackendSpec::Mock { seed } => Some(MockScorer::new(seed)),
            BackendSpec::Openai(_) => None,
        }
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>> {
        let spec = &self.backends.embedder;
        if let Some(cfg) = spec.backend_config(Role::Embedder) {
            return Ok(Arc::new(OpenAiClient::new(cfg?)?));
        }
        let BackendSpec::Mock { seed } = spec else {
            unreachable!("non-mock specs handled above")
        };
        Ok(Arc::new(MockEmbedder::new(*seed)))
    }
}
