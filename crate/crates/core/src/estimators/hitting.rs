use serde::{Deserialize, Serialize};

use super::events::{generate_events, EventMode};
use crate::dynamics::Trajectory;
use crate::error::{NmdError, Result};
use crate::stats;

/// Fewest plane crossings accepted by [`hitting_time_histogram`].
pub const MIN_CROSSINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    pub gaps: Vec<f64>,
    /// `n_bins + 1` edges from 0 to the largest gap.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Maximum-likelihood exponential rate, `1 / mean gap`.
    pub rate: f64,
    /// Kolmogorov–Smirnov distance to the fitted exponential.
    pub ks_distance: f64,
    /// Asymptotic 5% critical value for `gaps.len()` samples.
    pub ks_critical: f64,
}

/// Histogram and exponential fit of the gaps between event times.
pub fn gap_statistics(times: &[f64], n_bins: usize) -> Result<HittingStats> {
    if times.len() < MIN_CROSSINGS {
        return Err(NmdError::InsufficientData { needed: MIN_CROSSINGS, got: times.len() });
    }
    if n_bins == 0 {
        return Err(NmdError::invalid("need at least one histogram bin"));
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = stats::mean(&gaps);
    if !(mean > 0.0) {
        return Err(NmdError::invalid("event times must be strictly increasing"));
    }
    let rate = 1.0 / mean;
    let top = gaps.iter().copied().fold(0.0, f64::max);
    let width = top / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0; n_bins];
    for &g in &gaps {
        let i = if width > 0.0 { ((g / width) as usize).min(n_bins - 1) } else { 0 };
        counts[i] += 1;
    }
    Ok(HittingStats {
        ks_distance: stats::ks_distance_exponential(&gaps, rate),
        ks_critical: stats::ks_critical_5pct(gaps.len()),
        gaps,
        bin_edges,
        counts,
        rate,
    })
}

/// Gap statistics of the crossings of the plane through `point` with normal
/// `normal`.
pub fn hitting_time_histogram(traj: &Trajectory, point: [f64; 2], normal: [f64; 2], n_bins: usize) -> Result<HittingStats> {
    let times = match generate_events(traj, EventMode::Plane { point, normal }) {
        Ok(events) => events.event_times(),
        Err(NmdError::EmptyEvents { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    gap_statistics(&times, n_bins)
}
