//! Group-aware, class-stratified repeated k-fold cross-validation and the
//! hyperparameter selection loss.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Label;
use super::metrics::{brier_score, Confusion};
use super::pipeline::{fit_pipeline, Hyperparams, Sample};
use crate::error::{Error, Result};

/// Fold index per sample. All samples of a group share a fold; each class's
/// groups are shuffled and dealt round-robin, so per-fold class counts differ
/// by at most one group.
pub fn group_stratified_folds(
    groups: &[String],
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if groups.len() != labels.len() {
        return Err(Error::Degenerate(
            "groups and labels differ in length".into(),
        ));
    }
    if k < 2 {
        return Err(Error::Config("need at least two folds".into()));
    }
    // a group's class is its majority label (ties count as good)
    let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (g, l) in groups.iter().zip(labels) {
        let e = votes.entry(g.as_str()).or_default();
        if l.is_good() {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    if votes.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} groups cannot fill {k} folds",
            votes.len()
        )));
    }
    let mut by_class: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for (g, (good, bad)) in &votes {
        let class = if good >= bad { Label::Good } else { Label::Bad };
        by_class.entry(class).or_default().push(g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut next = 0usize;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for g in members.iter() {
            fold_of.insert(g, next % k);
            next += 1;
        }
    }
    Ok(groups.iter().map(|g| fold_of[g.as_str()]).collect())
}

/// Groups that appear on both sides of any split.
pub fn leaked_groups(groups: &[String], assignment: &[usize], k: usize) -> Vec<String> {
    let mut leaked = BTreeSet::new();
    for fold in 0..k {
        let test: BTreeSet<&str> = groups
            .iter()
            .zip(assignment)
            .filter(|(_, f)| **f == fold)
            .map(|(g, _)| g.as_str())
            .collect();
        for (g, f) in groups.iter().zip(assignment) {
            if *f != fold && test.contains(g.as_str()) {
                leaked.insert(g.clone());
            }
        }
    }
    leaked.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub false_positive_rate: f64,
    pub brier: f64,
    pub precision_std: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            false_positive_rate: 0.5,
            brier: 0.3,
            precision_std: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            repeats: 3,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPrediction {
    pub index: usize,
    pub good: bool,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub repeat: usize,
    pub fold: usize,
    pub false_positive_rate: f64,
    pub precision: f64,
    pub macro_f1: f64,
    pub brier: f64,
    pub predictions: Vec<FoldPrediction>,
}

impl FoldMetrics {
    pub fn from_predictions(repeat: usize, fold: usize, predictions: Vec<FoldPrediction>) -> Self {
        let actual: Vec<bool> = predictions.iter().map(|p| p.good).collect();
        let probs: Vec<f64> = predictions.iter().map(|p| p.probability).collect();
        let predicted: Vec<bool> = probs.iter().map(|p| *p >= 0.5).collect();
        let c = Confusion::from_predictions(&actual, &predicted);
        Self {
            repeat,
            fold,
            false_positive_rate: c.false_positive_rate(),
            precision: c.precision(),
            macro_f1: c.macro_f1(),
            brier: brier_score(&actual, &probs),
            predictions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub hyperparams: Hyperparams,
    pub folds: Vec<FoldMetrics>,
    pub mean_false_positive_rate: f64,
    pub mean_brier: f64,
    pub precision_std: f64,
    pub mean_macro_f1: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub results: Vec<GridResult>,
    pub best_index: usize,
}

impl CvReport {
    pub fn best(&self) -> &GridResult {
        &self.results[self.best_index]
    }
}

/// `w1 * mean FPR + w2 * mean Brier + w3 * std(precision)` over all folds of
/// all repeats (population std).
pub fn cv_loss(folds: &[FoldMetrics], w: &LossWeights) -> (f64, f64, f64, f64) {
    let n = folds.len() as f64;
    let fpr = folds.iter().map(|f| f.false_positive_rate).sum::<f64>() / n;
    let brier = folds.iter().map(|f| f.brier).sum::<f64>() / n;
    let pm = folds.iter().map(|f| f.precision).sum::<f64>() / n;
    let pstd = (folds
        .iter()
        .map(|f| (f.precision - pm).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (
        w.false_positive_rate * fpr + w.brier * brier + w.precision_std * pstd,
        fpr,
        brier,
        pstd,
    )
}

pub fn cross_validate(
    samples: &[Sample],
    grid: &[Hyperparams],
    cfg: &CvConfig,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("hyperparameter grid"));
    }
    let groups: Vec<String> = samples.iter().map(|s| s.group.clone()).collect();
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let splits: Vec<Vec<usize>> = (0..cfg.repeats.max(1))
        .map(|r| {
            group_stratified_folds(&groups, &labels, cfg.folds, cfg.seed.wrapping_add(r as u64))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..splits.len()).flat_map(move |r| (0..cfg.folds).map(move |f| (g, r, f))))
        .collect();
    let fold_results: Vec<FoldMetrics> = jobs
        .par_iter()
        .map(|&(g, r, f)| {
            let assignment = &splits[r];
            let train: Vec<Sample> = samples
                .iter()
                .zip(assignment)
                .filter(|(_, a)| **a != f)
                .map(|(s, _)| s.clone())
                .collect();
            let model = fit_pipeline(&train, &grid[g], cfg.seed)?;
            let predictions = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == f)
                .map(|(i, s)| FoldPrediction {
                    index: i,
                    good: s.label.is_good(),
                    probability: model.predict(&s.features),
                })
                .collect();
            Ok(FoldMetrics::from_predictions(r, f, predictions))
        })
        .collect::<Result<_>>()?;

    let per_point = splits.len() * cfg.folds;
    let results: Vec<GridResult> = grid
        .iter()
        .zip(fold_results.chunks(per_point))
        .map(|(hp, folds)| {
            let (loss, fpr, brier, pstd) = cv_loss(folds, &cfg.weights);
            GridResult {
                hyperparams: *hp,
                folds: folds.to_vec(),
                mean_false_positive_rate: fpr,
                mean_brier: brier,
                precision_std: pstd,
                mean_macro_f1: folds.iter().map(|f| f.macro_f1).sum::<f64>() / folds.len() as f64,
                loss,
            }
        })
        .collect();
    let best_index = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.loss.total_cmp(&b.1.loss).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    Ok(CvReport {
        results,
        best_index,
    })
}
