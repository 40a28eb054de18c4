use std::sync::Arc;

use super::prompts::{parse_action, parse_bullets, policy_prompt, simulation_prompt};
use super::{ActionProposer, StateEvaluator, StepSimulator};
use crate::backend::{Embedder, Generator, TokenScorer};
use crate::error::{BackendError, Result};
use crate::tree::{StoryConfig, StoryState};
use crate::value::features::{extract_features, FeatureConfig};
use crate::value::pipeline::ValueModel;

/// Action policy backed by a text generator.
pub struct PromptedPolicy {
    pub backend: Arc<dyn Generator>,
    pub story: StoryConfig,
}

impl ActionProposer for PromptedPolicy {
    fn propose(&self, state: &StoryState, n: usize) -> Result<Vec<String>, BackendError> {
        let replies = self
            .backend
            .complete(&policy_prompt(state, &self.story), n)?;
        Ok(replies.iter().filter_map(|r| parse_action(r)).collect())
    }
}

/// Simulator backed by a (greedy) text generator.
pub struct PromptedSimulator {
    pub backend: Arc<dyn Generator>,
    pub story: StoryConfig,
}

impl StepSimulator for PromptedSimulator {
    fn simulate(&self, state: &StoryState, action: &str) -> Result<Vec<String>, BackendError> {
        let prompt = simulation_prompt(state, action, &self.story);
        let reply = self
            .backend
            .complete(&prompt, 1)?
            .into_iter()
            .next()
            .unwrap_or_default();
        parse_bullets(&reply, self.story.bullets_per_step).ok_or_else(|| {
            BackendError::Malformed(format!(
                "expected {} bullet lines in simulator reply",
                self.story.bullets_per_step
            ))
        })
    }
}

/// `V(s)` from the trained value model over extracted story features.
pub struct FeatureEvaluator {
    pub model: Arc<ValueModel>,
    pub scorer: Arc<dyn TokenScorer>,
    pub embedder: Arc<dyn Embedder>,
    pub features: FeatureConfig,
    pub story: StoryConfig,
}

impl StateEvaluator for FeatureEvaluator {
    fn evaluate(&self, state: &StoryState) -> Result<f64> {
        let mut fv = extract_features(
            &state.bullets,
            self.scorer.as_ref(),
            self.embedder.as_ref(),
            &self.features,
        )?;
        fv.completion_fraction = Some(self.story.completion_fraction(state.depth));
        Ok(self.model.predict(&fv))
    }
}
