use serde::{Deserialize, Serialize};

use crate::backend::TokenLogprob;
use crate::error::{Error, Result};

/// Parameters of the inverted-U interest curve over surprisal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuriosityConfig {
    /// Surprisal of peak interest, in bits.
    pub optimal_surprisal: f64,
    /// Width of the interest peak, in bits.
    pub spread: f64,
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        Self {
            optimal_surprisal: 4.0,
            spread: 0.6,
        }
    }
}

impl CuriosityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spread > 0.0) || !self.optimal_surprisal.is_finite() {
            return Err(Error::Config(format!(
                "curiosity spread must be positive (got {})",
                self.spread
            )));
        }
        Ok(())
    }
}

/// Per-token surprisal in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurprisalSeries {
    values: Vec<f64>,
}

impl SurprisalSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("surprisal series"));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Degenerate(format!("invalid surprisal value {v}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn token_count(&self) -> usize {
        self.values.len()
    }
}

/// `S(i) = -log2 P(i | context)` from natural-log probabilities.
pub fn surprisal_series(logprobs: &[TokenLogprob]) -> Result<SurprisalSeries> {
    if logprobs.is_empty() {
        return Err(Error::EmptyInput("token log-probabilities"));
    }
    let values = logprobs
        .iter()
        .map(|t| {
            let bits = -t.logprob / std::f64::consts::LN_2;
            // -0.0 for certain tokens
            if bits == 0.0 {
                0.0
            } else {
                bits
            }
        })
        .collect();
    SurprisalSeries::new(values)
}

/// Gaussian interest `exp(-(S - S0)^2 / (2 sigma^2))`, maximal (1) at `S0`.
pub fn interest(surprisal: f64, cfg: &CuriosityConfig) -> f64 {
    let d = surprisal - cfg.optimal_surprisal;
    (-(d * d) / (2.0 * cfg.spread * cfg.spread)).exp()
}

/// Mean interest over all tokens.
pub fn curiosity_index(series: &SurprisalSeries, cfg: &CuriosityConfig) -> f64 {
    let sum: f64 = series.values.iter().map(|s| interest(*s, cfg)).sum();
    sum / series.values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    /// Moving-average window (tokens) for the gradient features.
    pub window: usize,
    /// Minimum rise (bits) of a peak over both neighbours.
    pub prominence: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            window: 5,
            prominence: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurprisalDynamics {
    /// Peaks per token.
    pub peak_frequency: f64,
    /// Mean surprisal at peaks; `None` without peaks.
    pub peak_mean_height: Option<f64>,
    /// Population std of gaps between consecutive peaks; `None` below two peaks.
    pub peak_interval_std: Option<f64>,
    pub gradient_window_mean: f64,
    pub gradient_window_var: f64,
}

/// Indices of interior points rising at least `prominence` above both neighbours.
pub fn find_peaks(values: &[f64], prominence: f64) -> Vec<usize> {
    values
        .windows(3)
        .enumerate()
        .filter_map(|(i, w)| {
            let rise = w[1] - w[0].max(w[2]);
            (rise > 0.0 && rise >= prominence).then_some(i + 1)
        })
        .collect()
}

/// Trailing moving average ("valid" mode): `len - window + 1` points.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(values.len() - window + 1);
    let mut sum: f64 = values[..window].iter().sum();
    out.push(sum / window as f64);
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum / window as f64);
    }
    out
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn surprisal_dynamics(
    series: &SurprisalSeries,
    cfg: &DynamicsConfig,
) -> Result<SurprisalDynamics> {
    let values = series.values();
    if cfg.window < 2 {
        return Err(Error::Config("dynamics window must be >= 2".into()));
    }
    if values.len() < cfg.window {
        return Err(Error::InsufficientData(format!(
            "series of {} tokens is shorter than window {}",
            values.len(),
            cfg.window
        )));
    }
    let peaks = find_peaks(values, cfg.prominence);
    let heights: Vec<f64> = peaks.iter().map(|&i| values[i]).collect();
    let intervals: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) as f64).collect();

    let smoothed = moving_average(values, cfg.window);
    let gradients: Vec<f64> = smoothed.windows(2).map(|w| w[1] - w[0]).collect();
    let (gradient_window_mean, gradient_window_var) = if gradients.is_empty() {
        (0.0, 0.0)
    } else {
        (mean(&gradients), variance(&gradients))
    };

    Ok(SurprisalDynamics {
        peak_frequency: peaks.len() as f64 / values.len() as f64,
        peak_mean_height: (!heights.is_empty()).then(|| mean(&heights)),
        peak_interval_std: (!intervals.is_empty()).then(|| variance(&intervals).sqrt()),
        gradient_window_mean,
        gradient_window_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(p: f64) -> TokenLogprob {
        TokenLogprob {
            token: "x".into(),
            logprob: p.ln(),
        }
    }

    #[test]
    fn surprisal_bits() {
        let s = surprisal_series(&[lp(0.25), lp(1.0), lp(1.0 / 16.0)]).unwrap();
        assert_eq!(s.values(), &[2.0, 0.0, 4.0]);
        assert!(surprisal_series(&[]).is_err());
    }

    #[test]
    fn interest_values() {
        let cfg = CuriosityConfig::default();
        assert_eq!(interest(4.0, &cfg), 1.0);
        // exp(-1 / 0.72), evaluated independently
        assert!((interest(5.0, &cfg) - 0.249_352_208_777_296).abs() < 1e-12);
    }

    #[test]
    fn curiosity_examples() {
        let cfg = CuriosityConfig::default();
        let flat = SurprisalSeries::new(vec![4.0; 7]).unwrap();
        assert_eq!(curiosity_index(&flat, &cfg), 1.0);
        let two = SurprisalSeries::new(vec![4.0, 5.0]).unwrap();
        assert!((curiosity_index(&two, &cfg) - 0.624_676_104_388_648).abs() < 1e-12);
        assert!(SurprisalSeries::new(vec![]).is_err());
        assert!(SurprisalSeries::new(vec![-1.0]).is_err());
    }

    #[test]
    fn dynamics_constant_series() {
        let s = SurprisalSeries::new(vec![3.0; 20]).unwrap();
        let d = surprisal_dynamics(&s, &DynamicsConfig::default()).unwrap();
        assert_eq!(d.peak_frequency, 0.0);
        assert_eq!(d.peak_mean_height, None);
        assert_eq!(d.gradient_window_mean, 0.0);
        assert_eq!(d.gradient_window_var, 0.0);
    }

    #[test]
    fn dynamics_triangular_bump() {
        let vals = vec![
            2.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 4.0, 3.0, 2.0, 2.0, 2.0,
        ];
        let s = SurprisalSeries::new(vals).unwrap();
        let d = surprisal_dynamics(&s, &DynamicsConfig::default()).unwrap();
        assert_eq!(d.peak_frequency, 1.0 / 13.0);
        assert_eq!(d.peak_mean_height, Some(6.0));
        assert_eq!(d.peak_interval_std, None);
    }

    #[test]
    fn dynamics_increasing_series() {
        let s = SurprisalSeries::new((0..12).map(f64::from).collect()).unwrap();
        let d = surprisal_dynamics(&s, &DynamicsConfig::default()).unwrap();
        assert_eq!(d.peak_frequency, 0.0);
        assert!((d.gradient_window_mean - 1.0).abs() < 1e-12);
        assert!(d.gradient_window_var.abs() < 1e-12);
    }

    #[test]
    fn dynamics_short_series_rejected() {
        let s = SurprisalSeries::new(vec![1.0, 2.0]).unwrap();
        assert!(surprisal_dynamics(&s, &DynamicsConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn interest_symmetric_and_bounded(x in 0.0f64..10.0, s0 in 0.0f64..12.0, sigma in 0.1f64..3.0) {
            let cfg = CuriosityConfig { optimal_surprisal: s0, spread: sigma };
            let a = interest(s0 + x, &cfg);
            let b = interest(s0 - x, &cfg);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(interest(s0 + x + 0.5, &cfg) <= a);
        }

        #[test]
        fn curiosity_order_invariant(mut vals in proptest::collection::vec(0.0f64..15.0, 1..40), seed in any::<u64>()) {
            let cfg = CuriosityConfig::default();
            let a = curiosity_index(&SurprisalSeries::new(vals.clone()).unwrap(), &cfg);
            let n = vals.len();
            vals.rotate_left((seed as usize) % n);
            vals.reverse();
            let b = curiosity_index(&SurprisalSeries::new(vals).unwrap(), &cfg);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a > 0.0 && a <= 1.0);
        }
    }
}
