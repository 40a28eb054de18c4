//! Nine-dimension rubric judging through a generation backend.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Generator;
use crate::error::{Error, Result};

pub const RUBRIC_KEYS: [&str; 9] = [
    "Plot Structure",
    "Tension",
    "Originality",
    "Character Development",
    "Overall Impact",
    "Theme",
    "Conflict",
    "Pacing",
    "Style and Voice",
];

pub const RUBRIC_TEMPLATE: &str = include_str!("../../templates/rubric_prompt.txt");

pub fn rubric_prompt(template: &str, story: &str) -> String {
    template.replace("{story}", story.trim())
}

/// Scores in [`RUBRIC_KEYS`] order, each in `1..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScores(pub [u8; 9]);

impl RubricScores {
    pub fn mean(&self) -> f64 {
        self.0.iter().map(|v| f64::from(*v)).sum::<f64>() / 9.0
    }
}

/// The last balanced `{...}` object in `reply`.
fn trailing_object(reply: &str) -> Option<&str> {
    let end = reply.rfind('}')?;
    let bytes = reply.as_bytes();
    let mut depth = 0usize;
    for i in (0..=end).rev() {
        match bytes[i] {
            b'}' => depth += 1,
            b'{' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&reply[i..=end]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses the trailing JSON object of a judge reply. Exactly the nine rubric
/// keys must be present, each with an integer value between 1 and 10.
pub fn parse_rubric(reply: &str) -> Result<RubricScores> {
    let obj =
        trailing_object(reply).ok_or_else(|| Error::Rubric("no JSON object in reply".into()))?;
    let value: serde_json::Value =
        serde_json::from_str(obj).map_err(|e| Error::Rubric(format!("invalid JSON: {e}")))?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::Rubric("rubric output is not an object".into()))?;
    if let Some(extra) = map.keys().find(|k| !RUBRIC_KEYS.contains(&k.as_str())) {
        return Err(Error::Rubric(format!("unexpected key {extra:?}")));
    }
    let mut scores = [0u8; 9];
    for (slot, key) in scores.iter_mut().zip(RUBRIC_KEYS) {
        let v = map
            .get(key)
            .ok_or_else(|| Error::Rubric(format!("missing key {key:?}")))?;
        let n = v
            .as_u64()
            .ok_or_else(|| Error::Rubric(format!("{key:?} is not an integer: {v}")))?;
        if !(1..=10).contains(&n) {
            return Err(Error::Rubric(format!("{key:?} = {n} outside 1-10")));
        }
        *slot = n as u8;
    }
    Ok(RubricScores(scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricReport {
    pub ratings: Vec<RubricScores>,
    /// Per-dimension means in [`RUBRIC_KEYS`] order.
    pub dimension_means: Vec<f64>,
    pub overall_mean: f64,
    /// Repeats dropped after every attempt came back malformed.
    pub misses: usize,
    /// Malformed replies, including ones later retried successfully.
    pub malformed: usize,
}

/// Rates a story `repeats` times, retrying each malformed reply up to
/// `attempts` times in total before counting the repeat as a miss.
pub fn rubric_rate(
    judge: &dyn Generator,
    template: &str,
    story: &str,
    repeats: usize,
    attempts: usize,
) -> Result<RubricReport> {
    if repeats == 0 || attempts == 0 {
        return Err(Error::Config("repeats and attempts must be >= 1".into()));
    }
    let prompt = rubric_prompt(template, story);
    let mut ratings = Vec::with_capacity(repeats);
    let (mut misses, mut malformed) = (0, 0);
    let mut last_error = None;
    for _ in 0..repeats {
        let mut got = None;
        for _ in 0..attempts {
            let reply = judge
                .complete(&prompt, 1)?
                .into_iter()
                .next()
                .unwrap_or_default();
            match parse_rubric(&reply) {
                Ok(s) => {
                    got = Some(s);
                    break;
                }
                Err(e) => {
                    malformed += 1;
                    last_error = Some(e);
                }
            }
        }
        match got {
            Some(s) => ratings.push(s),
            None => misses += 1,
        }
    }
    if ratings.is_empty() {
        return Err(last_error.unwrap_or_else(|| Error::Rubric("no ratings".into())));
    }
    let n = ratings.len() as f64;
    let dimension_means: Vec<f64> = (0..9)
        .map(|d| ratings.iter().map(|r| f64::from(r.0[d])).sum::<f64>() / n)
        .collect();
    let overall_mean = dimension_means.iter().sum::<f64>() / 9.0;
    Ok(RubricReport {
        ratings,
        dimension_means,
        overall_mean,
        misses,
        malformed,
    })
}

/// [`rubric_rate`] over many stories concurrently; output order matches input.
pub fn rate_stories(
    judge: &dyn Generator,
    template: &str,
    stories: &[String],
    repeats: usize,
    attempts: usize,
) -> Vec<Result<RubricReport>> {
    stories
        .par_iter()
        .map(|s| rubric_rate(judge, template, s, repeats, attempts))
        .collect()
}
