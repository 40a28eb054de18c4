//! Log-linear scaling of `V_max` against iteration count.
//!
//! Each experiment gets its own OLS line on `(ln k, V_max)`. The pooled slope
//! is the within-experiment estimate (every experiment keeps its own
//! intercept), which absorbs per-experiment offsets without a full
//! mixed-effects model.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSeries {
    pub group: String,
    /// `(k, V_max)` points.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub group: String,
    pub n: usize,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    /// Mean of the per-experiment intercepts at the pooled slope.
    pub intercept: f64,
    pub slope: f64,
    pub slope_std_error: f64,
    /// `None` when the response has no variance.
    pub r_squared: Option<f64>,
    /// One-sided p-value for a positive pooled slope.
    pub p_value: Option<f64>,
    pub degrees_of_freedom: usize,
    /// Present when more than one experiment was fitted.
    pub groups: Option<Vec<GroupFit>>,
}

pub const FIT_MODEL: &str =
    "V_max = b0 + b1 * ln(k); per-experiment OLS plus pooled within-experiment slope";

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, Option<f64>) {
    let mx = mean(x.iter().copied());
    let my = mean(y.iter().copied());
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);
    (intercept, slope, r2)
}

pub fn loglinear_fit(series: &[ExperimentSeries]) -> Result<FitResult> {
    if series.is_empty() {
        return Err(Error::EmptyInput("experiment series"));
    }
    let mut transformed = Vec::with_capacity(series.len());
    for s in series {
        if s.points.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "experiment {:?} has {} points, need at least 3",
                s.group,
                s.points.len()
            )));
        }
        if let Some((k, _)) = s.points.iter().find(|(k, _)| !(*k >= 1.0)) {
            return Err(Error::InsufficientData(format!(
                "experiment {:?} has k = {k}, need k >= 1",
                s.group
            )));
        }
        let mut ks: Vec<f64> = s.points.iter().map(|p| p.0).collect();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        if ks.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "experiment {:?} needs at least two distinct k",
                s.group
            )));
        }
        let x: Vec<f64> = s.points.iter().map(|p| p.0.ln()).collect();
        let y: Vec<f64> = s.points.iter().map(|p| p.1).collect();
        transformed.push((s.group.clone(), x, y));
    }

    let group_fits: Vec<GroupFit> = transformed
        .iter()
        .map(|(g, x, y)| {
            let (intercept, slope, r_squared) = ols(x, y);
            GroupFit {
                group: g.clone(),
                n: x.len(),
                intercept,
                slope,
                r_squared,
            }
        })
        .collect();

    // within-experiment (demeaned) slope
    let (mut sxx, mut sxy, mut n) = (0.0, 0.0, 0usize);
    let mut means = Vec::with_capacity(transformed.len());
    for (_, x, y) in &transformed {
        let mx = mean(x.iter().copied());
        let my = mean(y.iter().copied());
        sxx += x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        sxy += x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>();
        n += x.len();
        means.push((mx, my));
    }
    let slope = sxy / sxx;
    let (mut sse, mut sst) = (0.0, 0.0);
    let grand = mean(transformed.iter().flat_map(|(_, _, y)| y.iter().copied()));
    for ((_, x, y), (mx, my)) in transformed.iter().zip(&means) {
        for (a, b) in x.iter().zip(y) {
            sse += (b - my - slope * (a - mx)).powi(2);
            sst += (b - grand).powi(2);
        }
    }
    let groups = transformed.len();
    let df = n.saturating_sub(groups + 1);
    let slope_std_error = if df > 0 {
        (sse / df as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    let p_value = if slope_std_error > 0.0 && slope_std_error.is_finite() {
        let t = slope / slope_std_error;
        let dist =
            StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
        Some(1.0 - dist.cdf(t))
    } else if slope_std_error == 0.0 && slope != 0.0 {
        Some(if slope > 0.0 { 0.0 } else { 1.0 })
    } else {
        None
    };
    let intercept = means.iter().map(|(mx, my)| my - slope * mx).sum::<f64>() / groups as f64;

    Ok(FitResult {
        model: FIT_MODEL.to_string(),
        intercept,
        slope,
        slope_std_error: if slope_std_error.is_finite() {
            slope_std_error
        } else {
            0.0
        },
        r_squared: (sst > 0.0).then(|| 1.0 - sse / sst),
        p_value,
        degrees_of_freedom: df,
        groups: (groups > 1).then_some(group_fits),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(group: &str, b0: f64, b1: f64, ks: &[f64]) -> ExperimentSeries {
        ExperimentSeries {
            group: group.into(),
            points: ks.iter().map(|k| (*k, b0 + b1 * k.ln())).collect(),
        }
    }

    #[test]
    fn exact_line() {
        let f = loglinear_fit(&[line("a", 0.5, 0.02, &[1.0, 2.0, 5.0, 10.0, 50.0])]).unwrap();
        assert!((f.slope - 0.02).abs() < 1e-9);
        assert!((f.intercept - 0.5).abs() < 1e-9);
        assert!((f.r_squared.unwrap() - 1.0).abs() < 1e-9);
        assert!(f.groups.is_none());
    }

    #[test]
    fn group_offsets_absorbed() {
        let f = loglinear_fit(&[
            line("a", 0.5, 0.02, &[1.0, 4.0, 16.0]),
            line("b", 0.7, 0.02, &[2.0, 8.0, 32.0]),
        ])
        .unwrap();
        assert!((f.slope - 0.02).abs() < 1e-9);
        let g = f.groups.unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[1].intercept - 0.7).abs() < 1e-9);
    }

    #[test]
    fn constant_series() {
        let f = loglinear_fit(&[line("a", 0.6, 0.0, &[1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(f.r_squared.is_none());
    }

    #[test]
    fn errors() {
        assert!(loglinear_fit(&[line("a", 0.5, 0.02, &[1.0, 2.0])]).is_err());
        assert!(loglinear_fit(&[line("a", 0.5, 0.02, &[0.5, 2.0, 3.0])]).is_err());
        assert!(loglinear_fit(&[line("a", 0.5, 0.02, &[2.0, 2.0, 2.0])]).is_err());
    }
}
