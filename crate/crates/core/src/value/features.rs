//! The fourteen story features fed to the value model.
//!
//! Curiosity, coherence and the five peak/gradient dynamics features are the
//! core set. The remaining seven (surprisal mean/std/max, interest-band
//! fraction, coherence std, half-story surprisal means) are this crate's own
//! choice, picked to cover engagement, complexity, pacing and thematic spread.
//! A slot is `None` when it could not be computed; the pipeline imputes it.

use serde::{Deserialize, Serialize};

use super::coherence::pairwise_cosines;
use super::surprisal::{
    curiosity_index, mean, surprisal_dynamics, surprisal_series, variance, CuriosityConfig,
    DynamicsConfig, SurprisalSeries,
};
use crate::backend::{Embedder, EmbeddingVector, TokenScorer};
use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 14;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "curiosity_index",
    "coherence_score",
    "peak_frequency",
    "peak_mean_height",
    "peak_interval_std",
    "gradient_window_mean",
    "gradient_window_var",
    "surprisal_mean",
    "surprisal_std",
    "surprisal_max",
    "interest_band_fraction",
    "coherence_std",
    "surprisal_first_half_mean",
    "surprisal_second_half_mean",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub curiosity_index: Option<f64>,
    pub coherence_score: Option<f64>,
    pub peak_frequency: Option<f64>,
    pub peak_mean_height: Option<f64>,
    pub peak_interval_std: Option<f64>,
    pub gradient_window_mean: Option<f64>,
    pub gradient_window_var: Option<f64>,
    pub surprisal_mean: Option<f64>,
    pub surprisal_std: Option<f64>,
    pub surprisal_max: Option<f64>,
    pub interest_band_fraction: Option<f64>,
    pub coherence_std: Option<f64>,
    pub surprisal_first_half_mean: Option<f64>,
    pub surprisal_second_half_mean: Option<f64>,
    /// Side metadata; not a model input.
    #[serde(default)]
    pub completion_fraction: Option<f64>,
}

impl FeatureVector {
    pub fn to_array(&self) -> [Option<f64>; FEATURE_COUNT] {
        [
            self.curiosity_index,
            self.coherence_score,
            self.peak_frequency,
            self.peak_mean_height,
            self.peak_interval_std,
            self.gradient_window_mean,
            self.gradient_window_var,
            self.surprisal_mean,
            self.surprisal_std,
            self.surprisal_max,
            self.interest_band_fraction,
            self.coherence_std,
            self.surprisal_first_half_mean,
            self.surprisal_second_half_mean,
        ]
    }

    pub fn from_array(values: [Option<f64>; FEATURE_COUNT]) -> Self {
        let [curiosity_index, coherence_score, peak_frequency, peak_mean_height, peak_interval_std, gradient_window_mean, gradient_window_var, surprisal_mean, surprisal_std, surprisal_max, interest_band_fraction, coherence_std, surprisal_first_half_mean, surprisal_second_half_mean] =
            values;
        Self {
            curiosity_index,
            coherence_score,
            peak_frequency,
            peak_mean_height,
            peak_interval_std,
            gradient_window_mean,
            gradient_window_var,
            surprisal_mean,
            surprisal_std,
            surprisal_max,
            interest_band_fraction,
            coherence_std,
            surprisal_first_half_mean,
            surprisal_second_half_mean,
            completion_fraction: None,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.to_array().iter().filter(|v| v.is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    #[serde(default)]
    pub curiosity: CuriosityConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

/// Fills the surprisal-derived and embedding-derived slots from whichever
/// inputs are available.
pub fn features_from_parts(
    series: Option<&SurprisalSeries>,
    embeddings: Option<&[EmbeddingVector]>,
    cfg: &FeatureConfig,
) -> FeatureVector {
    let mut fv = FeatureVector::default();
    if let Some(series) = series {
        let s = series.values();
        fv.curiosity_index = Some(curiosity_index(series, &cfg.curiosity));
        if let Ok(d) = surprisal_dynamics(series, &cfg.dynamics) {
            fv.peak_frequency = Some(d.peak_frequency);
            fv.peak_mean_height = d.peak_mean_height;
            fv.peak_interval_std = d.peak_interval_std;
            fv.gradient_window_mean = Some(d.gradient_window_mean);
            fv.gradient_window_var = Some(d.gradient_window_var);
        }
        fv.surprisal_mean = Some(mean(s));
        fv.surprisal_std = Some(variance(s).sqrt());
        fv.surprisal_max = s.iter().copied().reduce(f64::max);
        let band = s
            .iter()
            .filter(|v| (**v - cfg.curiosity.optimal_surprisal).abs() <= cfg.curiosity.spread)
            .count();
        fv.interest_band_fraction = Some(band as f64 / s.len() as f64);
        let half = s.len() / 2;
        if half > 0 {
            fv.surprisal_first_half_mean = Some(mean(&s[..half]));
            fv.surprisal_second_half_mean = Some(mean(&s[half..]));
        }
    }
    if let Some(Ok(sims)) = embeddings.map(pairwise_cosines) {
        fv.coherence_score = Some(mean(&sims));
        fv.coherence_std = Some(variance(&sims).sqrt());
    }
    fv
}

/// Scores the bullets as one running text and embeds each bullet as a
/// sentence. Backend failures leave the affected slots missing.
pub fn extract_features(
    bullets: &[String],
    scorer: &dyn TokenScorer,
    embedder: &dyn Embedder,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let text = bullets.join("\n");
    if bullets.is_empty() || text.trim().is_empty() {
        return Err(Error::EmptyInput("story text"));
    }
    let series = match scorer.score_tokens(&text) {
        Ok(lps) => surprisal_series(&lps).ok(),
        Err(e) => {
            log::warn!("token scoring failed, surprisal features missing: {e}");
            None
        }
    };
    let embeddings = if bullets.len() >= 2 {
        match embedder.embed(bullets) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("embedding failed, coherence features missing: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(features_from_parts(
        series.as_ref(),
        embeddings.as_deref(),
        cfg,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockEmbedder, MockScorer};
    use crate::backend::TokenLogprob;
    use crate::error::BackendError;

    struct FailingScorer;
    impl TokenScorer for FailingScorer {
        fn score_tokens(&self, _: &str) -> Result<Vec<TokenLogprob>, BackendError> {
            Err(BackendError::Timeout { attempts: 3 })
        }
    }

    fn story(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| format!("- the keeper walks to the lighthouse number {i}."))
            .collect()
    }

    #[test]
    fn single_sentence_has_missing_coherence() {
        let fv = extract_features(
            &story(1),
            &MockScorer::new(1),
            &MockEmbedder::new(1),
            &FeatureConfig::default(),
        )
        .unwrap();
        assert_eq!(fv.coherence_score, None);
        assert_eq!(fv.coherence_std, None);
        assert!(fv.curiosity_index.is_some());
        assert!(fv.surprisal_mean.is_some());
    }

    #[test]
    fn deterministic_under_mocks() {
        let s = story(8);
        let cfg = FeatureConfig::default();
        let a = extract_features(&s, &MockScorer::new(5), &MockEmbedder::new(5), &cfg).unwrap();
        let b = extract_features(&s, &MockScorer::new(5), &MockEmbedder::new(5), &cfg).unwrap();
        assert_eq!(a, b);
        let ci = a.curiosity_index.unwrap();
        assert!(ci > 0.0 && ci <= 1.0);
        let co = a.coherence_score.unwrap();
        assert!((-1.0..=1.0).contains(&co));
        let band = a.interest_band_fraction.unwrap();
        assert!((0.0..=1.0).contains(&band));
    }

    #[test]
    fn scorer_failure_leaves_slots_missing() {
        let fv = extract_features(
            &story(4),
            &FailingScorer,
            &MockEmbedder::new(1),
            &FeatureConfig::default(),
        )
        .unwrap();
        assert!(fv.curiosity_index.is_none());
        assert!(fv.coherence_score.is_some());
        assert_eq!(fv.missing_count(), 12);
    }

    #[test]
    fn empty_story_rejected() {
        assert!(extract_features(
            &[],
            &MockScorer::new(1),
            &MockEmbedder::new(1),
            &FeatureConfig::default()
        )
        .is_err());
    }

    #[test]
    fn array_round_trip() {
        let arr: [Option<f64>; FEATURE_COUNT] =
            std::array::from_fn(|i| if i % 3 == 0 { None } else { Some(i as f64) });
        assert_eq!(FeatureVector::from_array(arr).to_array(), arr);
    }
}
