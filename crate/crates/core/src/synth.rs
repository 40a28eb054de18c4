//! Seeded synthetic data: labeled feature rows, surprisal series, text
//! stories scored by the mock backends, and a toy search environment whose
//! optimum is known.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::backend::mock::{mock_vocabulary, MockScorer};
use crate::error::{BackendError, Result};
use crate::search::{ActionProposer, StateEvaluator, StepSimulator};
use crate::tree::{StoryConfig, StoryState};
use crate::value::corpus::{Label, LabeledStory};
use crate::value::features::{FeatureVector, FEATURE_COUNT};
use crate::value::pipeline::Sample;
use crate::value::surprisal::SurprisalSeries;
use crate::value::tune::CuriositySample;

fn label_for(group: usize) -> Label {
    if group.is_multiple_of(2) {
        Label::Good
    } else {
        Label::Bad
    }
}

/// `n_groups` stories (alternating good and bad), five completion levels each.
/// The first six features carry a class gap of `shift` standard units; every
/// feature gets a per-story random effect, and about 5% of cells are missing.
pub fn synthetic_feature_corpus(n_groups: usize, shift: f64, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid sd");
    let mut out = Vec::with_capacity(n_groups * 5);
    for g in 0..n_groups {
        let label = label_for(g);
        let sign = if label.is_good() { 0.5 } else { -0.5 };
        let effect: Vec<f64> = (0..FEATURE_COUNT).map(|_| noise.sample(&mut rng)).collect();
        for level in 0..5 {
            let mut values = [None; FEATURE_COUNT];
            for (j, slot) in values.iter_mut().enumerate() {
                let planted = if j < 6 { sign * shift } else { 0.0 };
                let drift = 0.1 * level as f64;
                let v = planted + effect[j] + drift + noise.sample(&mut rng);
                *slot = (rng.random::<f64>() >= 0.05).then_some(v);
            }
            let mut features = FeatureVector::from_array(values);
            features.completion_fraction = Some(0.5 + 0.125 * level as f64);
            out.push(Sample {
                features,
                label,
                group: format!("g{g}"),
            });
        }
    }
    out
}

/// Surprisal series whose planted tokens sit at 4 bits for good stories and
/// split between 2 and 6 bits for bad ones; half the tokens are uniform
/// background noise in `[0, 12]`. Five truncations per story.
pub fn synthetic_surprisal_corpus(n_groups: usize, seed: u64) -> Vec<CuriositySample> {
    const LEN: usize = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = 0.3;
    let mut out = Vec::with_capacity(n_groups * 5);
    for g in 0..n_groups {
        let label = label_for(g);
        let series: Vec<f64> = (0..LEN)
            .map(|_| {
                if rng.random::<bool>() {
                    return rng.random_range(0.0..12.0);
                }
                let centre = match label {
                    Label::Good => 4.0,
                    Label::Bad if rng.random::<bool>() => 2.0,
                    Label::Bad => 6.0,
                };
                let x: f64 = Normal::new(centre, spread)
                    .expect("valid sd")
                    .sample(&mut rng);
                x.max(0.0)
            })
            .collect();
        for level in 0..5 {
            let n = LEN / 2 + level * LEN / 8;
            out.push(CuriositySample {
                series: SurprisalSeries::new(series[..n].to_vec()).expect("non-negative series"),
                label,
                group: format!("g{g}"),
            });
        }
    }
    out
}

/// Full-length stories built from the mock vocabulary and expanded to every
/// completion level. Good stories draw most words from those the mock scorer
/// rates near 4 bits and reuse a small theme set; bad stories draw from the
/// extremes.
pub fn synthetic_stories(
    n_stories: usize,
    story: &StoryConfig,
    scorer: &MockScorer,
    seed: u64,
) -> Result<Vec<LabeledStory>> {
    let vocab = mock_vocabulary();
    let (mid, extreme): (Vec<&String>, Vec<&String>) = {
        let mid = vocab
            .iter()
            .filter(|w| (scorer.base_surprisal(w) - 4.0).abs() <= 0.8)
            .collect();
        let extreme = vocab
            .iter()
            .filter(|w| {
                let s = scorer.base_surprisal(w);
                !(2.0..=8.0).contains(&s)
            })
            .collect();
        (mid, extreme)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..n_stories {
        let label = label_for(i);
        let pool = if label.is_good() { &mid } else { &extreme };
        let theme: Vec<&String> = pool.choose_multiple(&mut rng, 6).copied().collect();
        let bullets: Vec<String> = (0..story.total_bullets)
            .map(|_| {
                let words: Vec<&str> = (0..6)
                    .map(|_| {
                        let r: f64 = rng.random();
                        let w = if r < 0.3 {
                            theme.choose(&mut rng).copied()
                        } else if r < 0.7 {
                            pool.choose(&mut rng).copied()
                        } else {
                            vocab.choose(&mut rng)
                        };
                        w.expect("non-empty word pool").as_str()
                    })
                    .collect();
                format!("{}.", words.join(" "))
            })
            .collect();
        out.extend(LabeledStory::at_completion_levels(
            &bullets,
            label,
            &format!("story-{i}"),
            story,
        )?);
    }
    Ok(out)
}

/// Complete `branching`-ary tree of depth `depth` with seeded leaf values.
/// Actions are `a0`, `a1`, ...; interior states evaluate to the mean of the
/// leaves below them.
#[derive(Debug, Clone)]
pub struct OracleEnvironment {
    pub branching: usize,
    pub depth: usize,
    leaf_values: Vec<f64>,
}

impl OracleEnvironment {
    pub fn new(branching: usize, depth: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let leaves = branching.pow(depth as u32);
        Self {
            branching,
            depth,
            leaf_values: (0..leaves).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn story_config(&self) -> StoryConfig {
        StoryConfig::new(1, self.depth).expect("positive depth")
    }

    pub fn leaf_values(&self) -> &[f64] {
        &self.leaf_values
    }

    /// Index and value of the best leaf (lowest index on ties).
    pub fn optimum(&self) -> (usize, f64) {
        self.leaf_values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
    }

    /// Choice indices along a state's action history.
    pub fn path_of(&self, state: &StoryState) -> Vec<usize> {
        state
            .cot_history
            .iter()
            .map(|a| a.trim_start_matches('a').parse().expect("oracle action"))
            .collect()
    }

    /// Leaf index reached by a complete path.
    pub fn leaf_index(&self, path: &[usize]) -> usize {
        path.iter().fold(0, |acc, c| acc * self.branching + c)
    }

    fn subtree_mean(&self, path: &[usize]) -> f64 {
        let span = self.branching.pow((self.depth - path.len()) as u32);
        let start = self.leaf_index(path) * span;
        self.leaf_values[start..start + span].iter().sum::<f64>() / span as f64
    }
}

impl ActionProposer for OracleEnvironment {
    fn propose(&self, _: &StoryState, n: usize) -> Result<Vec<String>, BackendError> {
        Ok((0..self.branching.min(n))
            .map(|i| format!("a{i}"))
            .collect())
    }
}

impl StepSimulator for OracleEnvironment {
    fn simulate(&self, _: &StoryState, action: &str) -> Result<Vec<String>, BackendError> {
        Ok(vec![format!("took {action}")])
    }
}

impl StateEvaluator for OracleEnvironment {
    fn evaluate(&self, state: &StoryState) -> Result<f64> {
        Ok(self.subtree_mean(&self.path_of(state)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::TokenScorer;
    use crate::value::surprisal::{curiosity_index, surprisal_series, CuriosityConfig};

    #[test]
    fn feature_corpus_shape() {
        let c = synthetic_feature_corpus(10, 1.0, 0);
        assert_eq!(c.len(), 50);
        assert_eq!(c.iter().filter(|s| s.label.is_good()).count(), 25);
        let missing: usize = c.iter().map(|s| s.features.missing_count()).sum();
        assert!(missing > 0 && missing < 100);
        assert_eq!(c, synthetic_feature_corpus(10, 1.0, 0));
    }

    #[test]
    fn surprisal_corpus_separates_at_four_bits() {
        let c = synthetic_surprisal_corpus(20, 0);
        let cfg = CuriosityConfig::default();
        let mean_for = |good: bool| {
            let v: Vec<f64> = c
                .iter()
                .filter(|s| s.label.is_good() == good)
                .map(|s| curiosity_index(&s.series, &cfg))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean_for(true) > mean_for(false) + 0.2);
    }

    #[test]
    fn good_stories_score_closer_to_four_bits() {
        let story = StoryConfig::default();
        let scorer = MockScorer::new(7);
        let stories = synthetic_stories(4, &story, &scorer, 1).unwrap();
        assert_eq!(stories.len(), 20);
        let ci = |s: &LabeledStory| {
            let lp = scorer.score_tokens(&s.bullets.join("\n")).unwrap();
            curiosity_index(&surprisal_series(&lp).unwrap(), &CuriosityConfig::default())
        };
        assert!(ci(&stories[4]) > ci(&stories[9]));
    }

    #[test]
    fn oracle_values() {
        let env = OracleEnvironment::new(3, 4, 1);
        assert_eq!(env.leaf_values().len(), 81);
        let (i, v) = env.optimum();
        assert_eq!(env.leaf_values()[i], v);
        assert_eq!(
            env.subtree_mean(&[1, 2, 0, 1]),
            env.leaf_values()[27 + 2 * 9 + 1]
        );
        let all = env.leaf_values().iter().sum::<f64>() / 81.0;
        assert!((env.subtree_mean(&[]) - all).abs() < 1e-12);
    }
}
