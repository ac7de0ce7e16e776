//! Event-driven excited-state estimator, ergodic and time-average
//! observables, and the statistical harnesses around them.

mod ergodic;
mod events;
mod hitting;
mod pe_md;

pub use ergodic::{
    bo_running_averages, ergodicity_scan, ergodicity_scan_ensemble, gbo_time_average, gmd_monte_carlo,
    multipath_sampling_error, tail_half_average, ErgodicityScan, McEstimate, MultipathConfig, Window,
    MC_CHUNK,
};
pub use events::{calibrated_poisson_rate, generate_events, EventList, EventMode, EventRecord};
pub use hitting::{gap_statistics, hitting_time_histogram, HittingStats, MIN_CROSSINGS};
pub use pe_md::{pe_md, EhrenfestPropagator, PeMdConfig, PeMdResult, SegmentPropagator, SegmentTrace};

use serde::{Deserialize, Serialize};

/// Position observables used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// `sin(X₁X₂)`.
    SinX1X2,
    One,
    /// `|X|²`.
    XSquared,
    X1,
}

impl Observable {
    #[inline]
    pub fn eval(self, x: [f64; 2]) -> f64 {
        match self {
            Observable::SinX1X2 => (x[0] * x[1]).sin(),
            Observable::One => 1.0,
            Observable::XSquared => x[0] * x[0] + x[1] * x[1],
            Observable::X1 => x[0],
        }
    }

    /// Closed interval containing every value of the observable.
    pub fn range(self) -> (f64, f64) {
        match self {
            Observable::SinX1X2 => (-1.0, 1.0),
            Observable::One => (1.0, 1.0),
            Observable::XSquared => (0.0, f64::INFINITY),
            Observable::X1 => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}
