use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BoStepper, PhasePoint, Trajectory};
use crate::error::{NmdError, Result};
use crate::model::PotentialSpec;
use crate::{rng, stats};

/// Samples drawn from one random stream in [`gmd_monte_carlo`].
pub const MC_CHUNK: usize = 1 << 16;

/// Monte Carlo estimate of an ergodic average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub n_samples: usize,
    pub accepted: usize,
    pub seed: u64,
    /// Accepted samples in the outer 1% of the box; nonzero values suggest
    /// the box clips the allowed region.
    pub boundary_hits: usize,
}

/// Average of `g` over `{X : λ−(X) ≤ E}` by uniform rejection sampling in
/// `bbox` (one interval per dimension).
///
/// Samples are drawn in chunks of [`MC_CHUNK`], chunk `c` from the stream
/// `(seed, c)`, and reduced in chunk order, so the result does not depend on
/// the thread count.
pub fn gmd_monte_carlo<G>(
    spec: &PotentialSpec,
    g: G,
    energy: f64,
    n_samples: usize,
    seed: u64,
    bbox: &[[f64; 2]],
) -> Result<McEstimate>
where
    G: Fn([f64; 2]) -> f64 + Sync,
{
    if bbox.len() != spec.dim() {
        return Err(NmdError::invalid("bounding box dimension does not match the potential"));
    }
    if bbox.iter().any(|b| !(b[0] < b[1]) || !b[0].is_finite() || !b[1].is_finite()) {
        return Err(NmdError::invalid("bounding box intervals must be finite and non-empty"));
    }
    if n_samples == 0 {
        return Err(NmdError::invalid("need at least one sample"));
    }
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64, usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = rng::stream(seed, c as u64);
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let (mut sum, mut sum_sq, mut acc, mut hits) = (0.0, 0.0, 0usize, 0usize);
            for _ in 0..count {
                let mut x = [0.0; 2];
                let mut near_edge = false;
                for (xi, b) in x.iter_mut().zip(bbox) {
                    let u: f64 = stream.gen();
                    near_edge |= !(0.005..=0.995).contains(&u);
                    *xi = b[0] + u * (b[1] - b[0]);
                }
                if spec.lambda_minus_at(x) <= energy {
                    let v = g(x);
                    sum += v;
                    sum_sq += v * v;
                    acc += 1;
                    hits += near_edge as usize;
                }
            }
            (sum, sum_sq, acc, hits)
        })
        .collect();
    let (mut sum, mut sum_sq, mut accepted, mut boundary_hits) = (0.0, 0.0, 0, 0);
    for (s, q, a, h) in partial {
        sum += s;
        sum_sq += q;
        accepted += a;
        boundary_hits += h;
    }
    if accepted == 0 {
        return Err(NmdError::invalid(format!("no samples accepted at E = {energy}; check the box")));
    }
    let n = accepted as f64;
    let value = sum / n;
    let var = if accepted > 1 { ((sum_sq - n * value * value) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { value, standard_error: (var / n).sqrt(), n_samples, accepted, seed, boundary_hits })
}

/// Averaging window for time averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Full,
    /// `[T/2, T]`.
    TailHalf,
}

/// Trapezoid-rule time average of `g(X_t)` over the window.
pub fn gbo_time_average<G>(traj: &Trajectory, g: G, window: Window) -> Result<f64>
where
    G: Fn([f64; 2]) -> f64,
{
    let s = &traj.samples;
    if s.is_empty() {
        return Err(NmdError::invalid("empty trajectory"));
    }
    if s.len() == 1 {
        return Ok(g(s[0].x));
    }
    let values: Vec<f64> = s.iter().map(|v| g(v.x)).collect();
    let (t0, t1) = (s[0].t, s[s.len() - 1].t);
    let start = match window {
        Window::Full => t0,
        Window::TailHalf => 0.5 * (t0 + t1),
    };
    // dividing by the summed interval lengths keeps constant observables exact
    let (mut integral, mut len) = (0.0, 0.0);
    for k in 0..s.len() - 1 {
        let (a, b) = (s[k].t, s[k + 1].t);
        if b <= start {
            continue;
        }
        if a >= start {
            integral += 0.5 * (values[k] + values[k + 1]) * (b - a);
            len += b - a;
        } else {
            // partial interval, linear interpolation of g
            let r = (start - a) / (b - a);
            let g_start = values[k] + r * (values[k + 1] - values[k]);
            integral += 0.5 * (g_start + values[k + 1]) * (b - start);
            len += b - start;
        }
    }
    Ok(if len > 0.0 { integral / len } else { values[s.len() - 1] })
}

/// Running full-window averages `(1/T)∫₀ᵀ g(X_t) dt` of a Born–Oppenheimer
/// path at each horizon in `horizons`, without storing the path.
pub fn bo_running_averages<G>(
    spec: &PotentialSpec,
    init: &PhasePoint,
    dt: f64,
    horizons: &[f64],
    g: G,
) -> Result<Vec<f64>>
where
    G: Fn([f64; 2]) -> f64,
{
    let steps: Vec<usize> = horizons.iter().map(|&t| crate::dynamics::step_count(dt, t, 1)).collect::<Result<_>>()?;
    let max = steps.iter().copied().max().unwrap_or(0);
    let mut stepper = BoStepper::new(spec, *init)?;
    let mut g_prev = g(init.x);
    let mut integral = 0.0;
    let mut out = vec![f64::NAN; steps.len()];
    for k in 1..=max {
        stepper.step(dt)?;
        let g_now = g(stepper.state.x);
        integral += 0.5 * (g_prev + g_now) * dt;
        g_prev = g_now;
        for (o, &s) in out.iter_mut().zip(&steps) {
            if s == k {
                *o = integral / (k as f64 * dt);
            }
        }
    }
    for (o, &s) in out.iter_mut().zip(&steps) {
        if s == 0 {
            *o = g(init.x);
        }
    }
    Ok(out)
}

/// Tail-half average `(2/T)∫_{T/2}^T g(X_t) dt` along a Born–Oppenheimer
/// path, without storing it.
pub fn tail_half_average<G>(spec: &PotentialSpec, init: &PhasePoint, dt: f64, t_end: f64, g: G) -> Result<f64>
where
    G: Fn([f64; 2]) -> f64,
{
    let steps = crate::dynamics::step_count(dt, t_end, 1)?;
    if steps < 2 {
        return Err(NmdError::invalid("horizon must span at least two steps"));
    }
    let half = steps / 2;
    let mut stepper = BoStepper::new(spec, *init)?;
    for _ in 0..half {
        stepper.step(dt)?;
    }
    let mut g_prev = g(stepper.state.x);
    let mut integral = 0.0;
    for _ in half..steps {
        stepper.step(dt)?;
        let g_now = g(stepper.state.x);
        integral += 0.5 * (g_prev + g_now);
        g_prev = g_now;
    }
    Ok(integral / (steps - half) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityScan {
    /// `(T, |g_BO(T) − g_MD|)`; for ensembles the error is the RMS over paths.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of log error against log T, absent for fewer than
    /// two rows.
    pub slope: Option<f64>,
}

pub fn ergodicity_scan<G>(
    spec: &PotentialSpec,
    g: G,
    g_md: f64,
    init: &PhasePoint,
    dt: f64,
    t_list: &[f64],
) -> Result<ErgodicityScan>
where
    G: Fn([f64; 2]) -> f64 + Sync,
{
    ergodicity_scan_ensemble(spec, g, g_md, std::slice::from_ref(init), dt, t_list)
}

/// Ergodicity scan with the error at each `T` taken as the root mean square
/// over the paths started at `inits`.
pub fn ergodicity_scan_ensemble<G>(
    spec: &PotentialSpec,
    g: G,
    g_md: f64,
    inits: &[PhasePoint],
    dt: f64,
    t_list: &[f64],
) -> Result<ErgodicityScan>
where
    G: Fn([f64; 2]) -> f64 + Sync,
{
    if inits.is_empty() || t_list.is_empty() {
        return Err(NmdError::invalid("need at least one initial point and one horizon"));
    }
    let per_path: Vec<Vec<f64>> =
        inits.par_iter().map(|init| bo_running_averages(spec, init, dt, t_list, &g)).collect::<Result<_>>()?;
    let rows: Vec<(f64, f64)> = t_list
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let errs: Vec<f64> = per_path.iter().map(|v| v[j] - g_md).collect();
            (t, stats::rms(&errs))
        })
        .collect();
    let slope = if rows.len() >= 2 { stats::loglog_slope(&rows) } else { None };
    Ok(ErgodicityScan { rows, slope })
}

/// Parameters of the multi-path sampling-error experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathConfig {
    pub n_list: Vec<usize>,
    pub delta_v: f64,
    #[serde(default = "default_base_angle")]
    pub base_angle: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Paths in the pool; 0 means the largest entry of `n_list`.
    #[serde(default)]
    pub pool: usize,
    /// Shared starting position.
    #[serde(default)]
    pub x0: [f64; 2],
}

fn default_base_angle() -> f64 {
    1.2
}

/// Sampling error of averaging `N` tail-half path averages.
///
/// Path `n = 1, …, pool` starts at `x0` on the energy shell with angle
/// `base_angle + n·delta_v`. For each `N` the pool is split into
/// `⌊pool/N⌋` consecutive batches and the reported error is the root mean
/// square over batches of `(1/N)Σ_n ḡ_n − g_ref`. With `pool = N` this is
/// the plain single-batch error.
pub fn multipath_sampling_error<G>(
    spec: &PotentialSpec,
    g: G,
    energy: f64,
    cfg: &MultipathConfig,
    g_md_ref: f64,
) -> Result<Vec<(usize, f64)>>
where
    G: Fn([f64; 2]) -> f64 + Sync,
{
    let n_max = cfg.n_list.iter().copied().max().ok_or_else(|| NmdError::invalid("empty N list"))?;
    if cfg.n_list.contains(&0) {
        return Err(NmdError::invalid("N must be at least 1"));
    }
    let pool = if cfg.pool == 0 { n_max } else { cfg.pool };
    if pool < n_max {
        return Err(NmdError::invalid(format!("pool of {pool} paths is smaller than N = {n_max}")));
    }
    let errors: Vec<f64> = (1..=pool)
        .into_par_iter()
        .map(|n| {
            let angle = cfg.base_angle + n as f64 * cfg.delta_v;
            let init = PhasePoint::on_energy_shell(spec, energy, cfg.x0, angle)?;
            Ok(tail_half_average(spec, &init, cfg.dt, cfg.t_end, &g)? - g_md_ref)
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .n_list
        .iter()
        .map(|&n| {
            let batch_means: Vec<f64> = errors.chunks_exact(n).map(stats::mean).collect();
            (n, stats::rms(&batch_means))
        })
        .collect())
}
