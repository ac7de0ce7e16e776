use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{NmdError, Result};
use crate::rng;

/// How re-initialization events are placed along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EventMode {
    /// Every crossing of the plane through `point` with normal `normal`.
    Plane { point: [f64; 2], normal: [f64; 2] },
    /// Exponentially distributed gaps with mean `1/rate`.
    Poisson { rate: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub t: f64,
}

/// Start of the trajectory followed by the events, strictly increasing in
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventList {
    pub mode: EventMode,
    pub records: Vec<EventRecord>,
}

impl EventList {
    /// Number of events, not counting the start record.
    pub fn count(&self) -> usize {
        self.records.len() - 1
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.records[1..].iter().map(|r| r.t).collect()
    }
}

fn lerp2(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

pub fn generate_events(traj: &Trajectory, mode: EventMode) -> Result<EventList> {
    let samples = &traj.samples;
    let first = samples.first().ok_or_else(|| NmdError::invalid("empty trajectory"))?;
    let last = samples.last().unwrap();
    let mut records = vec![EventRecord { x: first.x, p: first.p, t: first.t }];
    match mode {
        EventMode::Plane { point, normal } => {
            if normal == [0.0, 0.0] || !normal.iter().all(|v| v.is_finite()) {
                return Err(NmdError::invalid("plane normal must be a finite nonzero vector"));
            }
            let side = |x: [f64; 2]| (x[0] - point[0]) * normal[0] + (x[1] - point[1]) * normal[1];
            let mut f0 = side(first.x);
            for w in samples.windows(2) {
                let f1 = side(w[1].x);
                if (f0 < 0.0) != (f1 < 0.0) {
                    let s = if f0 == f1 { 0.0 } else { f0 / (f0 - f1) };
                    let t = w[0].t + s * (w[1].t - w[0].t);
                    if t > records.last().unwrap().t {
                        records.push(EventRecord { x: lerp2(w[0].x, w[1].x, s), p: lerp2(w[0].p, w[1].p, s), t });
                    }
                }
                f0 = f1;
            }
        }
        EventMode::Poisson { rate, seed } => {
            if !(rate > 0.0) || !rate.is_finite() {
                return Err(NmdError::invalid(format!("Poisson rate must be positive, got {rate}")));
            }
            let gaps = Exp::new(rate).expect("rate checked positive");
            let mut stream = rng::stream(seed, 0);
            let interval = traj.sample_interval();
            let mut t = first.t;
            let mut last_index = 0;
            loop {
                t += gaps.sample(&mut stream);
                if t >= last.t {
                    break;
                }
                let index = (((t - first.t) / interval).round() as usize).min(samples.len() - 1);
                if index > last_index {
                    let s = &samples[index];
                    records.push(EventRecord { x: s.x, p: s.p, t: s.t });
                    last_index = index;
                }
            }
        }
    }
    if records.len() == 1 {
        return Err(NmdError::EmptyEvents { horizon: last.t - first.t });
    }
    Ok(EventList { mode, records })
}

/// Mean crossing rate of the plane along `traj`, the default rate for
/// Poisson events.
pub fn calibrated_poisson_rate(traj: &Trajectory, point: [f64; 2], normal: [f64; 2]) -> Result<f64> {
    let events = generate_events(traj, EventMode::Plane { point, normal })?;
    Ok(events.count() as f64 / traj.duration())
}
