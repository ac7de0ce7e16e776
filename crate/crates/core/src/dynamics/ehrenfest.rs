use serde::{Deserialize, Serialize};

use super::{step_count, ElectronicSample, Integrator, PhasePoint, Sample, Trajectory};
use crate::error::{NmdError, Result};
use crate::model::{dot2, PotentialSpec, SymMat2};

/// Norm convention for the electronic amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormConvention {
    /// `⟨ψ, ψ⟩ = 1`.
    #[default]
    Unit,
    /// `⟨ψ, ψ⟩ = 2 M^{-1/2}`, the normalization under which `ψ` and `P` are
    /// canonical for `H_E = |P|²/2 + λ− + M^{1/2}⟨ψ, V̌ψ⟩/2`.
    #[serde(rename = "two-over-sqrt-m")]
    TwoOverSqrtM,
}

impl NormConvention {
    /// Reference value of `⟨ψ, ψ⟩`.
    pub fn reference_norm(self, mass: f64) -> f64 {
        match self {
            NormConvention::Unit => 1.0,
            NormConvention::TwoOverSqrtM => 2.0 / mass.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EhrenfestMode {
    /// Störmer–Verlet for `H_E`, written with `V̌ = V − λ− I`.
    #[default]
    Canonical,
    /// The six-line scheme with `V` in place of `V̌` and the force
    /// `λ'− + ⟨ψ_r, V'ψ_r⟩ + ⟨ψ_i, V'ψ_i⟩`.
    FullMatrix,
}

/// Nuclear phase point plus the electronic amplitude `ψ = ψ_r + iψ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhrenfestState {
    pub phase: PhasePoint,
    pub psi_r: [f64; 2],
    pub psi_i: [f64; 2],
    pub convention: NormConvention,
}

impl EhrenfestState {
    /// `ψ = Ψ−(X)` scaled to the convention's reference norm.
    pub fn ground(spec: &PotentialSpec, phase: PhasePoint, mass: f64, convention: NormConvention) -> Result<Self> {
        let f = spec.frame_at(phase.x, None)?;
        Ok(Self::with_psi(phase, f.psi_minus, mass, convention))
    }

    /// `ψ = Ψ+(X)` scaled to the convention's reference norm.
    pub fn excited(spec: &PotentialSpec, phase: PhasePoint, mass: f64, convention: NormConvention) -> Result<Self> {
        let f = spec.frame_at(phase.x, None)?;
        Ok(Self::with_psi(phase, f.psi_plus, mass, convention))
    }

    /// Real `ψ` along the unit vector `dir`.
    pub fn with_psi(phase: PhasePoint, dir: [f64; 2], mass: f64, convention: NormConvention) -> Self {
        let s = convention.reference_norm(mass).sqrt();
        EhrenfestState { phase, psi_r: [s * dir[0], s * dir[1]], psi_i: [0.0; 2], convention }
    }

    /// `⟨ψ, ψ⟩`.
    pub fn norm(&self) -> f64 {
        dot2(self.psi_r, self.psi_r) + dot2(self.psi_i, self.psi_i)
    }

    /// `⟨ψ, Aψ⟩` for real symmetric `A`.
    fn expect(&self, a: &SymMat2) -> f64 {
        a.quad(self.psi_r) + a.quad(self.psi_i)
    }
}

/// `|⟨Ψ+(X), ψ⟩|² / ⟨ψ, ψ⟩`.
pub fn transition_probability(state: &EhrenfestState, spec: &PotentialSpec) -> Result<f64> {
    let f = spec.frame_at(state.phase.x, None)?;
    let re = dot2(f.psi_plus, state.psi_r);
    let im = dot2(f.psi_plus, state.psi_i);
    Ok(((re * re + im * im) / state.norm()).clamp(0.0, 1.0))
}

/// `H_E = |P|²/2 + λ− + ⟨ψ, V̌ψ⟩ / n_ref`, with `n_ref` the reference norm of
/// the state's convention; for `⟨ψ,ψ⟩ = 2M^{-1/2}` this is
/// `|P|²/2 + λ− + M^{1/2}⟨ψ, V̌ψ⟩/2`.
pub fn hamiltonian_ehrenfest(spec: &PotentialSpec, state: &EhrenfestState, mass: f64) -> f64 {
    let p = spec.parts(state.phase.x);
    let w = 1.0 / state.convention.reference_norm(mass);
    state.phase.kinetic() + (p.s - p.rho()) + w * state.expect(&p.check_matrix())
}

/// Conserved quantity of the full-matrix scheme, `|P|²/2 + λ− + ⟨ψ, Vψ⟩`.
fn hamiltonian_literal(spec: &PotentialSpec, state: &EhrenfestState) -> f64 {
    let p = spec.parts(state.phase.x);
    state.phase.kinetic() + (p.s - p.rho()) + state.expect(&p.matrix())
}

/// Gradient of the potential part of the energy at `x` for the given `ψ_r`,
/// `ψ_i`.
fn mode_terms(
    spec: &PotentialSpec,
    x: [f64; 2],
    psi_r: [f64; 2],
    psi_i: [f64; 2],
    mode: EhrenfestMode,
    weight: f64,
) -> Result<[f64; 2]> {
    let p = spec.parts(x);
    let gl = p.grad_lambda_minus(x)?;
    let mut f = gl;
    match mode {
        EhrenfestMode::Canonical => {
            let gr = [p.ds[0] - gl[0], p.ds[1] - gl[1]];
            for (i, fi) in f.iter_mut().enumerate() {
                let dvc = p.dv_check(gr, i);
                *fi += weight * (dvc.quad(psi_r) + dvc.quad(psi_i));
            }
            Ok(f)
        }
        EhrenfestMode::FullMatrix => {
            for (i, fi) in f.iter_mut().enumerate() {
                let dv = p.dv(i);
                *fi += dv.quad(psi_r) + dv.quad(psi_i);
            }
            Ok(f)
        }
    }
}

fn electronic_matrix(spec: &PotentialSpec, x: [f64; 2], mode: EhrenfestMode) -> SymMat2 {
    let p = spec.parts(x);
    match mode {
        EhrenfestMode::Canonical => p.check_matrix(),
        EhrenfestMode::FullMatrix => p.matrix(),
    }
}

fn axpy2(a: f64, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    [y[0] + a * x[0], y[1] + a * x[1]]
}

/// One Störmer–Verlet step of the Ehrenfest system.
///
/// With `ψ_r` and `X` as positions and `ψ_i` and `P` as momenta, the update
/// is: half step of `ψ_i` and `P`, full step of `X` and `ψ_r`, half step of
/// `ψ_i` and `P`. Every stage is explicit.
pub fn ehrenfest_step(
    spec: &PotentialSpec,
    state: &EhrenfestState,
    dt: f64,
    mass: f64,
    mode: EhrenfestMode,
) -> Result<EhrenfestState> {
    if !(mass > 0.0) {
        return Err(NmdError::invalid("mass ratio must be positive"));
    }
    let n0 = state.norm();
    if !(n0 >= 1e-300) {
        return Err(NmdError::NumericalUnderflow { norm: n0, t: state.phase.t });
    }
    let sm = mass.sqrt();
    let half = 0.5 * dt;
    let w = 1.0 / state.convention.reference_norm(mass);
    let ph = &state.phase;

    let v0 = electronic_matrix(spec, ph.x, mode);
    let psi_i_half = axpy2(-half * sm, v0.apply(state.psi_r), state.psi_i);
    let f0 = mode_terms(spec, ph.x, state.psi_r, psi_i_half, mode, w)?;
    let p_half = [ph.p[0] - half * f0[0], ph.p[1] - half * f0[1]];
    let x1 = [ph.x[0] + dt * p_half[0], ph.x[1] + dt * p_half[1]];
    let v1 = electronic_matrix(spec, x1, mode);
    let psi_r1 = axpy2(half * sm, v0.add(&v1).apply(psi_i_half), state.psi_r);
    let psi_i1 = axpy2(-half * sm, v1.apply(psi_r1), psi_i_half);
    let f1 = mode_terms(spec, x1, psi_r1, psi_i_half, mode, w)?;
    let p1 = [p_half[0] - half * f1[0], p_half[1] - half * f1[1]];

    let next = EhrenfestState {
        phase: PhasePoint { x: x1, p: p1, t: ph.t + dt },
        psi_r: psi_r1,
        psi_i: psi_i1,
        convention: state.convention,
    };
    let n1 = next.norm();
    if !(n1 >= 1e-300) {
        return Err(NmdError::NumericalUnderflow { norm: n1, t: next.phase.t });
    }
    Ok(next)
}

pub(crate) fn electronic_sample(spec: &PotentialSpec, state: &EhrenfestState) -> Result<ElectronicSample> {
    let norm = state.norm();
    let v = spec.matrix_at(state.phase.x);
    Ok(ElectronicSample {
        psi_r: state.psi_r,
        psi_i: state.psi_i,
        norm,
        p_e: transition_probability(state, spec)?,
        potential_energy: state.expect(&v) / norm,
    })
}

pub(crate) fn mode_energy(spec: &PotentialSpec, state: &EhrenfestState, mass: f64, mode: EhrenfestMode) -> f64 {
    match mode {
        EhrenfestMode::Canonical => hamiltonian_ehrenfest(spec, state, mass),
        EhrenfestMode::FullMatrix => hamiltonian_literal(spec, state),
    }
}

pub fn ehrenfest_trajectory(
    spec: &PotentialSpec,
    init: &EhrenfestState,
    dt: f64,
    t_end: f64,
    mass: f64,
    mode: EhrenfestMode,
    stride: usize,
) -> Result<Trajectory> {
    init.phase.check(spec)?;
    let steps = step_count(dt, t_end, stride)?;
    let record = |s: &EhrenfestState| -> Result<Sample> {
        Ok(Sample {
            t: s.phase.t,
            x: s.phase.x,
            p: s.phase.p,
            energy: mode_energy(spec, s, mass, mode),
            electronic: Some(electronic_sample(spec, s)?),
        })
    };
    let mut samples = Vec::with_capacity(steps / stride + 1);
    let mut state = *init;
    samples.push(record(&state)?);
    for k in 1..=steps {
        state = ehrenfest_step(spec, &state, dt, mass, mode)?;
        state.phase.t = init.phase.t + k as f64 * dt;
        if k % stride == 0 {
            samples.push(record(&state)?);
        }
    }
    let integrator = match mode {
        EhrenfestMode::Canonical => Integrator::EhrenfestCanonical,
        EhrenfestMode::FullMatrix => Integrator::EhrenfestFullMatrix,
    };
    Ok(Trajectory { dim: spec.dim(), dt, stride, integrator, samples })
}
