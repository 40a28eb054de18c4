use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::IterationReport;

/// Earliest iteration at which a story is fully generated under the default
/// story shape; gains are measured against it.
pub const DEFAULT_BASELINE_K: u64 = 8;

/// `(k, V_max)` points from iteration reports, skipping iterations before
/// any evaluation.
pub fn trajectory(reports: &[IterationReport]) -> Vec<(u64, f64)> {
    reports
        .iter()
        .filter_map(|r| r.v_max_final.map(|v| (r.iteration as u64, v)))
        .collect()
}

/// Smallest `k` with `V_max(k) >= (1 + gain) * V_max(baseline_k)`.
pub fn iterations_to_gain(
    series: &[(u64, f64)],
    gain: f64,
    baseline_k: u64,
) -> Result<Option<u64>> {
    let base = series
        .iter()
        .find(|(k, _)| *k == baseline_k)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            Error::InsufficientData(format!("baseline k = {baseline_k} not in trajectory"))
        })?;
    let target = (1.0 + gain) * base;
    let mut sorted = series.to_vec();
    sorted.sort_by_key(|(k, _)| *k);
    Ok(sorted
        .into_iter()
        .find(|(_, v)| *v >= target)
        .map(|(k, _)| k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub label: String,
    pub gain: f64,
    pub iterations: Option<u64>,
    /// `iterations(reference) / iterations(this)`.
    pub speedup: Option<f64>,
}

/// Iterations-to-gain for each trajectory, with speedups relative to the first.
pub fn speedup_table(
    trajectories: &[(String, Vec<(u64, f64)>)],
    gain: f64,
    baseline_k: u64,
) -> Result<Vec<SpeedupRow>> {
    let mut rows = Vec::with_capacity(trajectories.len());
    let mut reference = None;
    for (i, (label, series)) in trajectories.iter().enumerate() {
        let k = iterations_to_gain(series, gain, baseline_k)?;
        if i == 0 {
            reference = k;
        }
        rows.push(SpeedupRow {
            label: label.clone(),
            gain,
            iterations: k,
            speedup: match (reference, k) {
                (Some(r), Some(k)) if k > 0 => Some(r as f64 / k as f64),
                _ => None,
            },
        });
    }
    Ok(rows)
}

/// Compute spent in PF-days for a wall time, at the given sustained
/// throughput and utilization.
pub fn pf_days(wall_time_secs: f64, teraflops: f64, utilization: f64) -> f64 {
    wall_time_secs * teraflops * 1e12 * utilization / (1e15 * 86_400.0)
}
