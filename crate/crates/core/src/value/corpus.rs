use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureConfig};
use super::pipeline::Sample;
use crate::backend::{Embedder, TokenScorer};
use crate::error::{Error, Result};
use crate::tree::StoryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub fn is_good(self) -> bool {
        self == Label::Good
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStory {
    pub bullets: Vec<String>,
    pub label: Label,
    /// Story identity shared by all completion levels of one story.
    pub group: String,
    pub completion: f64,
}

/// Completion levels at which a full story enters the training corpus:
/// every step from half the planned depth to the full depth.
pub fn completion_levels(cfg: &StoryConfig) -> Vec<usize> {
    let start = cfg.max_depth.div_ceil(2);
    (start..=cfg.max_depth).collect()
}

impl LabeledStory {
    /// Truncations of a full story at each completion level.
    pub fn at_completion_levels(
        bullets: &[String],
        label: Label,
        group: &str,
        cfg: &StoryConfig,
    ) -> Result<Vec<Self>> {
        if bullets.len() != cfg.total_bullets {
            return Err(Error::BulletCount {
                expected: cfg.total_bullets,
                got: bullets.len(),
            });
        }
        Ok(completion_levels(cfg)
            .into_iter()
            .map(|depth| Self {
                bullets: bullets[..depth * cfg.bullets_per_step].to_vec(),
                label,
                group: group.to_string(),
                completion: cfg.completion_fraction(depth),
            })
            .collect())
    }
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Feature extraction over a corpus, in parallel; output order matches input.
pub fn featurize(
    stories: &[LabeledStory],
    scorer: &dyn TokenScorer,
    embedder: &dyn Embedder,
    cfg: &FeatureConfig,
) -> Result<Vec<Sample>> {
    stories
        .par_iter()
        .map(|s| {
            let mut features = extract_features(&s.bullets, scorer, embedder, cfg)?;
            features.completion_fraction = Some(s.completion);
            Ok(Sample {
                features,
                label: s.label,
                group: s.group.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_levels_match_checkpoints() {
        let cfg = StoryConfig::default();
        let fracs: Vec<f64> = completion_levels(&cfg)
            .into_iter()
            .map(|d| cfg.completion_fraction(d))
            .collect();
        assert_eq!(fracs, vec![0.5, 0.625, 0.75, 0.875, 1.0]);
    }

    #[test]
    fn truncations() {
        let cfg = StoryConfig::default();
        let bullets: Vec<String> = (0..32).map(|i| format!("b{i}")).collect();
        let levels = LabeledStory::at_completion_levels(&bullets, Label::Good, "g1", &cfg).unwrap();
        assert_eq!(levels.len(), 5);
        assert_eq!(levels[0].bullets.len(), 16);
        assert_eq!(levels[4].bullets.len(), 32);
        assert!(levels.iter().all(|l| l.group == "g1"));
        assert!(LabeledStory::at_completion_levels(&bullets[..5], Label::Bad, "g", &cfg).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let items = vec![LabeledStory {
            bullets: vec!["a".into()],
            label: Label::Bad,
            group: "g".into(),
            completion: 1.0,
        }];
        write_jsonl(&path, &items).unwrap();
        let back: Vec<LabeledStory> = read_jsonl(&path).unwrap();
        assert_eq!(back, items);
    }
}
