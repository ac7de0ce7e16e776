use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::events::{generate_events, EventMode, EventRecord};
use crate::dynamics::{
    bo_trajectory, ehrenfest_step, transition_probability, EhrenfestMode, EhrenfestState, NormConvention,
    PhasePoint,
};
use crate::error::{NmdError, Result};
use crate::model::PotentialSpec;

/// Advances the electronic-nuclear state of one segment by one step.
pub trait SegmentPropagator: Sync {
    fn step(&self, spec: &PotentialSpec, state: &EhrenfestState, dt: f64, mass: f64) -> Result<EhrenfestState>;
}

/// The Ehrenfest Störmer–Verlet step.
#[derive(Debug, Clone, Copy, Default)]
pub struct EhrenfestPropagator {
    pub mode: EhrenfestMode,
}

impl SegmentPropagator for EhrenfestPropagator {
    fn step(&self, spec: &PotentialSpec, state: &EhrenfestState, dt: f64, mass: f64) -> Result<EhrenfestState> {
        ehrenfest_step(spec, state, dt, mass, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeMdConfig {
    pub mass: f64,
    /// Step of the Born–Oppenheimer path that places the events.
    pub dt_bo: f64,
    /// Step of the Ehrenfest segments.
    pub dt_ehrenfest: f64,
    pub t_end: f64,
    pub events: EventMode,
    #[serde(default)]
    pub mode: EhrenfestMode,
    /// Horizons `T_c ≤ T` at which the running estimate is also reported.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub t_start: f64,
    pub t_end: f64,
    /// `∫ |⟨ψ_t, Ψ+(X_t)⟩| dt` over the segment with unit `ψ`.
    pub integral: f64,
    pub max_p_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeMdResult {
    pub pe_hat: f64,
    pub event_count: usize,
    pub segments: Vec<SegmentTrace>,
    /// `(T_c, p̂_e(T_c))` for each requested checkpoint.
    pub checkpoints: Vec<(f64, f64)>,
}

/// Event-driven estimate of the excited-state probability.
///
/// A Born–Oppenheimer path from `init` places the events. Between
/// consecutive events (and from the last event to `T`) an Ehrenfest segment
/// is run from the event's phase point with `ψ` reset to the unit ground
/// state, and `|⟨ψ_t, Ψ+(X_t)⟩|` is integrated by the trapezoid rule. The
/// estimate is the total integral divided by `T`.
pub fn pe_md(
    spec: &PotentialSpec,
    energy: f64,
    init: &PhasePoint,
    cfg: &PeMdConfig,
    propagator: &dyn SegmentPropagator,
) -> Result<PeMdResult> {
    if !(cfg.mass > 0.0) || !(cfg.dt_ehrenfest > 0.0) || !(cfg.t_end > 0.0) {
        return Err(NmdError::invalid("mass, Ehrenfest step and horizon must be positive"));
    }
    if !spec.classically_allowed(energy, &init.x[..spec.dim()])? {
        return Err(NmdError::invalid(format!("initial point {:?} is not classically allowed at E = {energy}", init.x)));
    }
    let traj = bo_trajectory(spec, init, cfg.dt_bo, cfg.t_end, 1)?;
    let events = generate_events(&traj, cfg.events)?;
    let t_start = traj.samples[0].t;
    let t_final = traj.samples.last().unwrap().t;
    let horizon = t_final - t_start;
    let mut checkpoints = cfg.checkpoints.clone();
    checkpoints.sort_by(f64::total_cmp);
    if checkpoints.iter().any(|&c| !(c > 0.0) || c > horizon * (1.0 + 1e-12)) {
        return Err(NmdError::invalid(format!("checkpoints must lie in (0, {horizon}]")));
    }

    let mut bounds: Vec<(EventRecord, f64)> =
        events.records.windows(2).map(|w| (w[0], w[1].t)).collect();
    bounds.push((*events.records.last().unwrap(), t_final));

    let per_segment: Vec<(SegmentTrace, Vec<f64>)> = bounds
        .par_iter()
        .map(|(start, end)| {
            let inside: Vec<f64> =
                checkpoints.iter().map(|c| t_start + c).filter(|c| *c > start.t && *c <= *end).collect();
            run_segment(spec, start, *end, cfg, propagator, &inside)
        })
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut cp_values = Vec::with_capacity(checkpoints.len());
    for (trace, partials) in &per_segment {
        let inside = checkpoints.iter().filter(|c| t_start + **c > trace.t_start && t_start + **c <= trace.t_end);
        for (c, partial) in inside.zip(partials) {
            cp_values.push((*c, ((total + partial) / c).clamp(0.0, 1.0)));
        }
        total += trace.integral;
    }
    Ok(PeMdResult {
        pe_hat: (total / horizon).clamp(0.0, 1.0),
        event_count: events.count(),
        segments: per_segment.into_iter().map(|(t, _)| t).collect(),
        checkpoints: cp_values,
    })
}

/// Integrates one segment, returning its trace and the partial integrals up
/// to each absolute time in `marks`.
fn run_segment(
    spec: &PotentialSpec,
    start: &EventRecord,
    end: f64,
    cfg: &PeMdConfig,
    propagator: &dyn SegmentPropagator,
    marks: &[f64],
) -> Result<(SegmentTrace, Vec<f64>)> {
    let len = end - start.t;
    if len <= 0.0 {
        let trace = SegmentTrace { t_start: start.t, t_end: end, integral: 0.0, max_p_e: 0.0 };
        return Ok((trace, vec![0.0; marks.len()]));
    }
    let steps = ((len / cfg.dt_ehrenfest) - 1e-9).ceil().max(1.0) as usize;
    let h = len / steps as f64;
    let phase = PhasePoint { x: start.x, p: start.p, t: start.t };
    let mut state = EhrenfestState::ground(spec, phase, cfg.mass, NormConvention::Unit)?;
    let mut p_prev = transition_probability(&state, spec)?;
    let mut a_prev = p_prev.sqrt();
    let mut max_p_e = p_prev;
    let mut integral = 0.0;
    let mut partials = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    for k in 1..=steps {
        state = propagator.step(spec, &state, h, cfg.mass)?;
        let tau0 = start.t + (k - 1) as f64 * h;
        let tau1 = if k == steps { end } else { start.t + k as f64 * h };
        state.phase.t = tau1;
        let p = transition_probability(&state, spec)?;
        let a = p.sqrt();
        while next_mark < marks.len() && marks[next_mark] <= tau1 {
            let r = ((marks[next_mark] - tau0) / h).clamp(0.0, 1.0);
            let a_mid = a_prev + r * (a - a_prev);
            partials.push(integral + 0.5 * (a_prev + a_mid) * r * h);
            next_mark += 1;
        }
        integral += 0.5 * (a_prev + a) * h;
        a_prev = a;
        p_prev = p;
        max_p_e = max_p_e.max(p_prev);
    }
    while partials.len() < marks.len() {
        partials.push(integral);
    }
    Ok((SegmentTrace { t_start: start.t, t_end: end, integral, max_p_e }, partials))
}
