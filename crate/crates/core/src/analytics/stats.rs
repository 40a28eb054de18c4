//! Paired effect sizes and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences handled with the exact null
/// distribution; larger samples use the normal approximation.
pub const EXACT_WILCOXON_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Differences left after dropping zeros.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W-)`.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// `mean(a - b) / sd(a - b)`; `None` when the differences are constant
    /// but non-zero.
    pub cohens_d: Option<f64>,
    /// Probability that arm A beats arm B on a random paired draw.
    pub cles: Option<f64>,
    pub wilcoxon: Wilcoxon,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `Φ(d / √2)`.
pub fn cles(d: f64) -> f64 {
    standard_normal().cdf(d / std::f64::consts::SQRT_2)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Signed-rank test on paired differences. Zero differences are dropped.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Wilcoxon {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Wilcoxon {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
        };
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p_value, method) = if n <= EXACT_WILCOXON_MAX_N {
        (exact_p(&ranks, w_plus), WilcoxonMethod::Exact)
    } else {
        let mu = total / 2.0;
        let mut var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0;
        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
            let t = j as f64;
            var -= (t * t * t - t) / 48.0;
            i += j;
        }
        let z = ((w_plus - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (
            (2.0 * (1.0 - standard_normal().cdf(z))).min(1.0),
            WilcoxonMethod::Normal,
        )
    };
    Wilcoxon {
        n,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        method,
    }
}

/// Two-sided exact p-value for `W+` under random signs. Ranks are doubled so
/// tied (half-integer) ranks stay integral.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total: f64 = counts.iter().sum();
    let w = (w_plus * 2.0).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn effect_stats(a: &[f64], b: &[f64]) -> Result<EffectReport> {
    if a.len() != b.len() {
        return Err(Error::InsufficientData(format!(
            "paired arms differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite score".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean_a, sd_a) = mean_sd(a);
    let (mean_b, sd_b) = mean_sd(b);
    let (mean_diff, sd_diff) = mean_sd(&diffs);
    let cohens_d = if sd_diff > 0.0 {
        Some(mean_diff / sd_diff)
    } else if mean_diff == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(EffectReport {
        n: a.len(),
        mean_a,
        mean_b,
        sd_a,
        sd_b,
        mean_diff,
        sd_diff,
        cohens_d,
        cles: cohens_d.map(cles),
        wilcoxon: wilcoxon_signed_rank(&diffs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cles_anchor() {
        assert!((cles(0.57) - 0.6566).abs() < 5e-4);
        assert_eq!(cles(0.0), 0.5);
        assert!(cles(0.3) < cles(0.6));
    }

    #[test]
    fn identical_arms() {
        let a = [3.0, 4.0, 5.0];
        let r = effect_stats(&a, &a).unwrap();
        assert_eq!(r.cohens_d, Some(0.0));
        assert_eq!(r.cles, Some(0.5));
        assert_eq!(r.wilcoxon.p_value, 1.0);
    }

    #[test]
    fn constant_nonzero_shift_has_no_d() {
        let r = effect_stats(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.cohens_d.is_none() && r.cles.is_none());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn small_table() {
        // diffs 1..=6 all positive: W+ = 21, two-sided p = 2 / 64
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!((w.w_plus, w.statistic), (21.0, 0.0));
        assert!((w.p_value - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn normal_branch_used_for_large_n() {
        let diffs: Vec<f64> = (1..=40)
            .map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 })
            .collect();
        let w = wilcoxon_signed_rank(&diffs);
        assert_eq!(w.method, WilcoxonMethod::Normal);
        assert!(w.p_value > 0.0 && w.p_value < 1.0);
    }

    #[test]
    fn errors() {
        assert!(effect_stats(&[1.0], &[2.0]).is_err());
        assert!(effect_stats(&[1.0, 2.0], &[2.0]).is_err());
    }
}
