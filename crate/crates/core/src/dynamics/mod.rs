//! Born–Oppenheimer and Ehrenfest propagators, the Landau–Zener model and
//! the maximal Lyapunov exponent.

mod bo;
mod ehrenfest;
mod lyapunov;
mod lz;

pub use bo::{bo_step, bo_trajectory, hamiltonian_bo, BoStepper};
pub use ehrenfest::{
    ehrenfest_step, ehrenfest_trajectory, hamiltonian_ehrenfest, transition_probability, EhrenfestMode,
    EhrenfestState, NormConvention,
};
pub use lyapunov::max_lyapunov;
pub use lz::{landau_zener_closed_form, landau_zener_energy, landau_zener_ode, LzOdeResult, LzPreset};

use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};
use crate::model::PotentialSpec;

/// Nuclear position and momentum at time `t`, unit nuclear mass.
///
/// One-dimensional models use the first component only; the second is kept
/// at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: [f64; 2],
    pub p: [f64; 2],
    #[serde(default)]
    pub t: f64,
}

impl PhasePoint {
    pub fn new(x: [f64; 2], p: [f64; 2]) -> Self {
        PhasePoint { x, p, t: 0.0 }
    }

    pub fn one_d(x: f64, p: f64) -> Self {
        PhasePoint::new([x, 0.0], [p, 0.0])
    }

    /// Start at `x` with speed `√(2(E − λ−(x)))` along `angle`.
    pub fn on_energy_shell(spec: &PotentialSpec, energy: f64, x: [f64; 2], angle: f64) -> Result<Self> {
        let kinetic = energy - spec.lambda_minus_at(x);
        if kinetic < 0.0 {
            return Err(NmdError::invalid(format!("X = {x:?} is outside the classically allowed region")));
        }
        let speed = (2.0 * kinetic).sqrt();
        Ok(match spec.dim() {
            1 => PhasePoint::one_d(x[0], speed * angle.cos().signum()),
            _ => PhasePoint::new(x, [speed * angle.cos(), speed * angle.sin()]),
        })
    }

    pub fn kinetic(&self) -> f64 {
        0.5 * (self.p[0] * self.p[0] + self.p[1] * self.p[1])
    }

    pub(crate) fn check(&self, spec: &PotentialSpec) -> Result<()> {
        let finite = self.x.iter().chain(&self.p).all(|v| v.is_finite()) && self.t.is_finite();
        if !finite {
            return Err(NmdError::invalid("phase point has non-finite entries"));
        }
        if spec.dim() == 1 && (self.x[1] != 0.0 || self.p[1] != 0.0) {
            return Err(NmdError::invalid("one-dimensional phase points must have zero second components"));
        }
        Ok(())
    }
}

/// Electronic part of an Ehrenfest sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronicSample {
    pub psi_r: [f64; 2],
    pub psi_i: [f64; 2],
    /// `⟨ψ, ψ⟩`.
    pub norm: f64,
    /// `|⟨Ψ+, ψ⟩|² / ⟨ψ, ψ⟩`.
    pub p_e: f64,
    /// `⟨ψ, Vψ⟩ / ⟨ψ, ψ⟩`.
    pub potential_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: [f64; 2],
    pub p: [f64; 2],
    /// The integrator's conserved quantity.
    pub energy: f64,
    pub electronic: Option<ElectronicSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Verlet,
    EhrenfestCanonical,
    EhrenfestFullMatrix,
}

/// States sampled every `stride` steps, including both end points.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub dt: f64,
    pub stride: usize,
    pub integrator: Integrator,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    /// Time between consecutive samples.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// `max |H(t) − H(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.samples.first().map_or(0.0, |s| s.energy);
        self.samples.iter().map(|s| (s.energy - h0).abs()).fold(0.0, f64::max)
    }
}

/// Step count for horizon `t_end`, requiring `stride` to divide it.
pub(crate) fn step_count(dt: f64, t_end: f64, stride: usize) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(NmdError::invalid(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(NmdError::invalid(format!("horizon must be non-negative, got {t_end}")));
    }
    if stride == 0 {
        return Err(NmdError::invalid("stride must be at least 1"));
    }
    let n = (t_end / dt).round() as usize;
    if n % stride != 0 {
        return Err(NmdError::invalid(format!("stride {stride} does not divide the {n} steps")));
    }
    Ok(n)
}
