//! Grid search over the interest-curve parameters, scoring each grid point by
//! how well a one-feature threshold on the curiosity index separates the
//! classes under group-aware cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Label;
use super::cv::group_stratified_folds;
use super::metrics::Confusion;
use super::surprisal::{curiosity_index, CuriosityConfig, SurprisalSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuriositySample {
    pub series: SurprisalSeries,
    pub label: Label,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub s0_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    /// `f1[i][j]` is the mean held-out F1 at `(s0_grid[i], sigma_grid[j])`.
    pub f1: Vec<Vec<f64>>,
    /// Standardized mean gap in curiosity index (good minus bad); breaks F1 ties.
    pub separation: Vec<Vec<f64>>,
    pub best_s0: f64,
    pub best_sigma: f64,
    pub best_f1: f64,
}

/// Threshold maximizing F1 of "good if index >= threshold" on the given data.
pub fn fit_threshold(values: &[f64], good: &[bool]) -> f64 {
    let mut candidates: Vec<f64> = values.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut thresholds = Vec::with_capacity(candidates.len() + 1);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend(candidates.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    thresholds.push(f64::INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for t in thresholds {
        let pred: Vec<bool> = values.iter().map(|v| *v >= t).collect();
        let f1 = Confusion::from_predictions(good, &pred).f1_positive();
        if f1 > best.0 {
            best = (f1, t);
        }
    }
    best.1
}

fn separation(values: &[f64], good: &[bool]) -> f64 {
    let split = |want: bool| -> Vec<f64> {
        values
            .iter()
            .zip(good)
            .filter(|(_, g)| **g == want)
            .map(|(v, _)| *v)
            .collect()
    };
    let (g, b) = (split(true), split(false));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    let (mg, mb) = (mean(&g), mean(&b));
    let pooled = ((var(&g, mg) + var(&b, mb)) / 2.0).sqrt();
    if pooled > 0.0 {
        (mg - mb) / pooled
    } else if mg > mb {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn tune_curiosity(
    samples: &[CuriositySample],
    s0_grid: &[f64],
    sigma_grid: &[f64],
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<TuneReport> {
    if s0_grid.is_empty() || sigma_grid.is_empty() {
        return Err(Error::EmptyInput("curiosity grid"));
    }
    if sigma_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config("sigma grid values must be positive".into()));
    }
    let good: Vec<bool> = samples.iter().map(|s| s.label.is_good()).collect();
    if good.iter().all(|g| *g) || good.iter().all(|g| !*g) {
        return Err(Error::SingleClass);
    }
    let groups: Vec<String> = samples.iter().map(|s| s.group.clone()).collect();
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let splits: Vec<Vec<usize>> = (0..repeats.max(1))
        .map(|r| group_stratified_folds(&groups, &labels, folds, seed.wrapping_add(r as u64)))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..s0_grid.len())
        .flat_map(|i| (0..sigma_grid.len()).map(move |j| (i, j)))
        .collect();
    let scored: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let cfg = CuriosityConfig {
                optimal_surprisal: s0_grid[i],
                spread: sigma_grid[j],
            };
            let index: Vec<f64> = samples
                .iter()
                .map(|s| curiosity_index(&s.series, &cfg))
                .collect();
            let mut f1_sum = 0.0;
            let mut n = 0usize;
            for assignment in &splits {
                for fold in 0..folds {
                    let (mut tr_v, mut tr_g, mut te_v, mut te_g) =
                        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                    for (k, a) in assignment.iter().enumerate() {
                        if *a == fold {
                            te_v.push(index[k]);
                            te_g.push(good[k]);
                        } else {
                            tr_v.push(index[k]);
                            tr_g.push(good[k]);
                        }
                    }
                    let t = fit_threshold(&tr_v, &tr_g);
                    let pred: Vec<bool> = te_v.iter().map(|v| *v >= t).collect();
                    f1_sum += Confusion::from_predictions(&te_g, &pred).f1_positive();
                    n += 1;
                }
            }
            (f1_sum / n as f64, separation(&index, &good))
        })
        .collect();

    let mut f1 = vec![vec![0.0; sigma_grid.len()]; s0_grid.len()];
    let mut sep = vec![vec![0.0; sigma_grid.len()]; s0_grid.len()];
    let mut best: Option<(usize, usize)> = None;
    for (&(i, j), &(f, s)) in cells.iter().zip(&scored) {
        f1[i][j] = f;
        sep[i][j] = s;
        let better = match best {
            None => true,
            Some((bi, bj)) => {
                let bf = f1[bi][bj];
                f > bf + 1e-12 || ((f - bf).abs() <= 1e-12 && s > sep[bi][bj])
            }
        };
        if better {
            best = Some((i, j));
        }
    }
    let (bi, bj) = best.expect("grid is non-empty");
    Ok(TuneReport {
        s0_grid: s0_grid.to_vec(),
        sigma_grid: sigma_grid.to_vec(),
        best_s0: s0_grid[bi],
        best_sigma: sigma_grid[bj],
        best_f1: f1[bi][bj],
        f1,
        separation: sep,
    })
}
