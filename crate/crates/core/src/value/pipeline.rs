//! Median imputation, standardization, PCA and a calibrated kernel classifier,
//! producing `V(s)`: the probability that a story state is good.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::calibration::PlattScaling;
use super::corpus::Label;
use super::cv::group_stratified_folds;
use super::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use super::metrics::{brier_score, Confusion};
use super::pca::Pca;
use super::svm::{Kernel, Svc, SvcParams};
use crate::error::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureVector,
    pub label: Label,
    pub group: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub c: f64,
    pub kernel: Kernel,
    pub n_components: usize,
    pub max_iter: usize,
    /// Group-aware folds used to collect out-of-fold scores for calibration.
    #[serde(default = "default_calibration_folds")]
    pub calibration_folds: usize,
}

fn default_calibration_folds() -> usize {
    3
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: Kernel::Rbf { gamma: 0.1 },
            n_components: 8,
            max_iter: 10_000,
            calibration_folds: default_calibration_folds(),
        }
    }
}

impl Hyperparams {
    fn svc_params(&self) -> SvcParams {
        SvcParams {
            c: self.c,
            kernel: self.kernel,
            max_iter: self.max_iter,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub medians: Vec<f64>,
}

impl Imputer {
    fn fit(rows: &[[Option<f64>; FEATURE_COUNT]]) -> Self {
        let medians = (0..FEATURE_COUNT)
            .map(|j| {
                let mut col: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
                if col.is_empty() {
                    return 0.0;
                }
                col.sort_by(f64::total_cmp);
                let m = col.len() / 2;
                if col.len() % 2 == 1 {
                    col[m]
                } else {
                    (col[m - 1] + col[m]) / 2.0
                }
            })
            .collect();
        Self { medians }
    }

    fn apply(&self, row: &[Option<f64>; FEATURE_COUNT]) -> Vec<f64> {
        row.iter()
            .zip(&self.medians)
            .map(|(v, m)| v.filter(|x| x.is_finite()).unwrap_or(*m))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Scaler {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let means: Vec<f64> = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let scales = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                // constant features pass through centred
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { means, scales }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Preprocessor {
    imputer: Imputer,
    scaler: Scaler,
    pca: Pca,
}

impl Preprocessor {
    fn fit(samples: &[&Sample], n_components: usize) -> Result<(Self, Vec<Vec<f64>>)> {
        let raw: Vec<_> = samples.iter().map(|s| s.features.to_array()).collect();
        let imputer = Imputer::fit(&raw);
        let imputed: Vec<Vec<f64>> = raw.iter().map(|r| imputer.apply(r)).collect();
        let scaler = Scaler::fit(&imputed);
        let scaled: Vec<Vec<f64>> = imputed.iter().map(|r| scaler.apply(r)).collect();
        let pca = Pca::fit(&scaled, n_components)?;
        let projected = scaled.iter().map(|r| pca.transform(r)).collect();
        Ok((
            Self {
                imputer,
                scaler,
                pca,
            },
            projected,
        ))
    }

    fn transform(&self, features: &FeatureVector) -> Vec<f64> {
        // keep in step with ValueModel::decision
        let imputed = self.imputer.apply(&features.to_array());
        self.pca.transform(&self.scaler.apply(&imputed))
    }
}

fn class_target(label: Label) -> f64 {
    if label.is_good() {
        1.0
    } else {
        -1.0
    }
}

fn fit_uncalibrated(samples: &[&Sample], hp: &Hyperparams) -> Result<(Preprocessor, Svc)> {
    let (pre, x) = Preprocessor::fit(samples, hp.n_components)?;
    let y: Vec<f64> = samples.iter().map(|s| class_target(s.label)).collect();
    let svc = Svc::fit(&x, &y, &hp.svc_params())?;
    Ok((pre, svc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub n_samples: usize,
    pub n_groups: usize,
    pub n_good: usize,
    pub n_bad: usize,
    /// True when calibration used out-of-fold scores; false for the
    /// in-sample fallback on very small corpora.
    pub calibrated_out_of_fold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_loss: Option<f64>,
}

/// A frozen value model. Construct with [`fit_pipeline`] or [`ValueModel::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueModel {
    schema_version: u32,
    feature_names: Vec<String>,
    hyperparams: Hyperparams,
    imputer: Imputer,
    scaler: Scaler,
    pca: Pca,
    svc: Svc,
    calibration: PlattScaling,
    pub metadata: TrainingMetadata,
}

impl ValueModel {
    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn pca(&self) -> &Pca {
        &self.pca
    }

    pub fn svc(&self) -> &Svc {
        &self.svc
    }

    pub fn calibration(&self) -> &PlattScaling {
        &self.calibration
    }

    pub fn decision(&self, features: &FeatureVector) -> f64 {
        let imputed = self.imputer.apply(&features.to_array());
        let x = self.pca.transform(&self.scaler.apply(&imputed));
        self.svc.decision(&x)
    }

    /// Calibrated probability that the story is good.
    pub fn predict(&self, features: &FeatureVector) -> f64 {
        self.calibration.probability(self.decision(features))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(model.schema_version));
        }
        if model.feature_names != FEATURE_NAMES {
            return Err(Error::Degenerate("model feature names do not match".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn predict_value(model: &ValueModel, features: &FeatureVector) -> f64 {
    model.predict(features)
}

/// Metrics of a model on labeled samples it was not trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutMetrics {
    pub n: usize,
    pub macro_f1: f64,
    pub brier: f64,
    pub false_positive_rate: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn evaluate_model(model: &ValueModel, samples: &[Sample]) -> Result<HeldOutMetrics> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluation samples"));
    }
    let actual: Vec<bool> = samples.iter().map(|s| s.label.is_good()).collect();
    let prob: Vec<f64> = samples.iter().map(|s| model.predict(&s.features)).collect();
    let pred: Vec<bool> = prob.iter().map(|p| *p >= 0.5).collect();
    let c = Confusion::from_predictions(&actual, &pred);
    Ok(HeldOutMetrics {
        n: samples.len(),
        macro_f1: c.macro_f1(),
        brier: brier_score(&actual, &prob),
        false_positive_rate: c.false_positive_rate(),
        precision: c.precision(),
        recall: c.recall(),
    })
}

/// Groups per class, for precondition checks.
pub(crate) fn groups_per_class(samples: &[Sample]) -> BTreeMap<Label, BTreeSet<&str>> {
    let mut out: BTreeMap<Label, BTreeSet<&str>> = BTreeMap::new();
    for s in samples {
        out.entry(s.label).or_default().insert(s.group.as_str());
    }
    out
}

pub fn fit_pipeline(samples: &[Sample], hp: &Hyperparams, seed: u64) -> Result<ValueModel> {
    let per_class = groups_per_class(samples);
    if per_class.len() < 2 {
        return Err(Error::SingleClass);
    }
    let min_groups = per_class.values().map(BTreeSet::len).min().unwrap_or(0);
    if min_groups < 2 {
        return Err(Error::InsufficientData(
            "each class needs at least two groups".into(),
        ));
    }
    if hp.n_components == 0 {
        return Err(Error::Config("n_components must be >= 1".into()));
    }

    let all: Vec<&Sample> = samples.iter().collect();
    let positive: Vec<bool> = samples.iter().map(|s| s.label.is_good()).collect();

    let folds = hp.calibration_folds.min(min_groups);
    let (decisions, out_of_fold) = if folds >= 2 {
        let groups: Vec<String> = samples.iter().map(|s| s.group.clone()).collect();
        let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
        let assignment = group_stratified_folds(&groups, &labels, folds, seed)?;
        let mut decisions = vec![0.0; samples.len()];
        for fold in 0..folds {
            let train: Vec<&Sample> = samples
                .iter()
                .zip(&assignment)
                .filter(|(_, f)| **f != fold)
                .map(|(s, _)| s)
                .collect();
            let (pre, svc) = fit_uncalibrated(&train, hp)?;
            for (i, s) in samples.iter().enumerate() {
                if assignment[i] == fold {
                    decisions[i] = svc.decision(&pre.transform(&s.features));
                }
            }
        }
        (decisions, true)
    } else {
        (Vec::new(), false)
    };

    let (pre, svc) = fit_uncalibrated(&all, hp)?;
    let decisions = if out_of_fold {
        decisions
    } else {
        log::warn!("too few groups for out-of-fold calibration; calibrating in-sample");
        samples
            .iter()
            .map(|s| svc.decision(&pre.transform(&s.features)))
            .collect()
    };
    let calibration = PlattScaling::fit(&decisions, &positive)?;

    let n_good = positive.iter().filter(|p| **p).count();
    let n_groups = samples
        .iter()
        .map(|s| s.group.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(ValueModel {
        schema_version: MODEL_SCHEMA_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        hyperparams: *hp,
        imputer: pre.imputer,
        scaler: pre.scaler,
        pca: pre.pca,
        svc,
        calibration,
        metadata: TrainingMetadata {
            seed,
            n_samples: samples.len(),
            n_groups,
            n_good,
            n_bad: samples.len() - n_good,
            calibrated_out_of_fold: out_of_fold,
            cv_loss: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synthetic_feature_corpus;

    #[test]
    fn separable_corpus_training_f1() {
        let corpus = synthetic_feature_corpus(40, 3.0, 11);
        let model = fit_pipeline(&corpus, &Hyperparams::default(), 11).unwrap();
        let actual: Vec<bool> = corpus.iter().map(|s| s.label.is_good()).collect();
        let pred: Vec<bool> = corpus
            .iter()
            .map(|s| model.predict(&s.features) >= 0.5)
            .collect();
        assert!(Confusion::from_predictions(&actual, &pred).macro_f1() >= 0.99);
        assert!(model.metadata.calibrated_out_of_fold);
    }

    #[test]
    fn confident_good_exemplar_scores_high() {
        let corpus = synthetic_feature_corpus(40, 3.0, 5);
        let model = fit_pipeline(&corpus, &Hyperparams::default(), 5).unwrap();
        let best = corpus
            .iter()
            .filter(|s| s.label.is_good())
            .max_by(|a, b| {
                model
                    .decision(&a.features)
                    .total_cmp(&model.decision(&b.features))
            })
            .unwrap();
        assert!(model.predict(&best.features.clone()) > 0.9);
    }

    #[test]
    fn predictions_in_range_and_all_missing_imputed() {
        let corpus = synthetic_feature_corpus(10, 1.0, 2);
        let model = fit_pipeline(&corpus, &Hyperparams::default(), 2).unwrap();
        for s in &corpus {
            let v = predict_value(&model, &s.features);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, predict_value(&model, &s.features));
        }
        let v = model.predict(&FeatureVector::default());
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn single_class_rejected() {
        let corpus: Vec<Sample> = synthetic_feature_corpus(6, 1.0, 2)
            .into_iter()
            .filter(|s| s.label.is_good())
            .collect();
        assert!(matches!(
            fit_pipeline(&corpus, &Hyperparams::default(), 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn deterministic_and_serializable() {
        let corpus = synthetic_feature_corpus(12, 2.0, 8);
        let hp = Hyperparams {
            kernel: Kernel::Linear,
            ..Default::default()
        };
        let a = fit_pipeline(&corpus, &hp, 3).unwrap();
        let b = fit_pipeline(&corpus, &hp, 3).unwrap();
        assert_eq!(a, b);
        let back = ValueModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
        assert!(a.svc().weights.is_some());
    }

    #[test]
    fn constant_feature_guarded() {
        let mut corpus = synthetic_feature_corpus(8, 2.0, 4);
        for s in &mut corpus {
            s.features.surprisal_max = Some(7.0);
        }
        let model = fit_pipeline(&corpus, &Hyperparams::default(), 4).unwrap();
        assert!(model
            .scaler
            .scales
            .iter()
            .all(|s| s.is_finite() && *s > 0.0));
    }
}
