use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};

type C64 = Complex<f64>;

/// `p_LZ = exp(−π δ² √M / P₀)`.
pub fn landau_zener_closed_form(delta: f64, mass: f64, p0: f64) -> Result<f64> {
    if !(p0 > 0.0) || !(mass > 0.0) || !(delta >= 0.0) {
        return Err(NmdError::invalid(format!(
            "Landau–Zener needs P0 > 0, M > 0, δ ≥ 0 (got P0 = {p0}, M = {mass}, δ = {delta})"
        )));
    }
    Ok((-std::f64::consts::PI * delta * delta * mass.sqrt() / p0).exp())
}

/// Energy form with `P₀ = √(2(E − λ−(0)))`.
pub fn landau_zener_energy(delta: f64, mass: f64, energy: f64, lambda_minus_0: f64) -> Result<f64> {
    if !(energy > lambda_minus_0) {
        return Err(NmdError::invalid(format!(
            "energy {energy} does not exceed λ−(0) = {lambda_minus_0}; the crossing is not reached"
        )));
    }
    landau_zener_closed_form(delta, mass, (2.0 * (energy - lambda_minus_0)).sqrt())
}

/// Horizon and step for the Landau–Zener ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LzPreset {
    pub t0: f64,
    pub dt: f64,
}

impl LzPreset {
    /// `T₀ = 60 / (√M P₀)^{1/2}`, i.e. 60 units of the natural time scale
    /// of the sweep, and `dt = 0.05 / (√M (P₀T₀ + δ))`.
    pub fn for_params(delta: f64, mass: f64, p0: f64) -> Self {
        let t0 = 60.0 / (mass.sqrt() * p0).sqrt();
        let dt = 0.05 / (mass.sqrt() * (p0 * t0 + delta));
        LzPreset { t0, dt }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LzOdeResult {
    /// `|φ₁(T₀)|²`.
    pub survival_diabatic: f64,
    /// `|⟨Ψ+(T₀), φ(T₀)⟩|²`.
    pub adiabatic_excited: f64,
    /// `| |φ(T₀)|² − 1 |`.
    pub norm_error: f64,
    /// `(t, |φ₁|², |φ₂|²)` at roughly 1000 evenly spaced steps.
    pub trace: Vec<[f64; 3]>,
}

/// Eigenvectors of `[[z, δ], [δ, −z]]`, ground first.
fn lz_frame(z: f64, delta: f64) -> ([f64; 2], [f64; 2]) {
    let rho = z.hypot(delta);
    let plus = if rho == 0.0 {
        [1.0, 0.0]
    } else if z >= 0.0 {
        let n = (z + rho).hypot(delta);
        [(z + rho) / n, delta / n]
    } else {
        let n = delta.hypot(rho - z);
        [delta / n, (rho - z) / n]
    };
    ([-plus[1], plus[0]], plus)
}

/// Integrates `i M^{-1/2} φ' = [[P₀t, δ], [δ, −P₀t]] φ` over `[−T₀, T₀]`
/// starting in the adiabatic ground state at `−T₀`.
///
/// Each step applies the exact exponential of the generator frozen at the
/// step midpoint, so the evolution is unitary.
pub fn landau_zener_ode(delta: f64, mass: f64, p0: f64, t0: f64, dt: f64) -> Result<LzOdeResult> {
    landau_zener_closed_form(delta, mass, p0)?;
    if !(t0 > 0.0) || !(dt > 0.0) {
        return Err(NmdError::invalid("horizon and step must be positive"));
    }
    let sm = mass.sqrt();
    let limit = 0.1 / (sm * (p0 * t0 + delta));
    if dt > limit {
        return Err(NmdError::invalid(format!("dt = {dt:e} exceeds the phase-resolution limit {limit:e}")));
    }
    let steps = (2.0 * t0 / dt).ceil() as usize;
    let h = 2.0 * t0 / steps as f64;
    let (g, _) = lz_frame(-p0 * t0, delta);
    let mut phi = [C64::new(g[0], 0.0), C64::new(g[1], 0.0)];
    let every = (steps / 1000).max(1);
    let mut trace = Vec::with_capacity(steps / every + 2);
    trace.push([-t0, phi[0].norm_sqr(), phi[1].norm_sqr()]);
    for k in 0..steps {
        let t = -t0 + (k as f64 + 0.5) * h;
        let z = p0 * t;
        let r = z.hypot(delta);
        let theta = sm * h * r;
        let (c, s) = (theta.cos(), theta.sin());
        let (nz, nx) = if r == 0.0 { (0.0, 0.0) } else { (z / r, delta / r) };
        // exp(−iθ n·σ) = cos θ − i sin θ (n_z σ_z + n_x σ_x)
        let mis = C64::new(0.0, -s);
        let a = [[c + mis * nz, mis * nx], [mis * nx, c - mis * nz]];
        phi = [a[0][0] * phi[0] + a[0][1] * phi[1], a[1][0] * phi[0] + a[1][1] * phi[1]];
        if (k + 1) % every == 0 || k + 1 == steps {
            trace.push([-t0 + (k + 1) as f64 * h, phi[0].norm_sqr(), phi[1].norm_sqr()]);
        }
    }
    let (_, e) = lz_frame(p0 * t0, delta);
    let overlap = phi[0] * e[0] + phi[1] * e[1];
    Ok(LzOdeResult {
        survival_diabatic: phi[0].norm_sqr(),
        adiabatic_excited: overlap.norm_sqr(),
        norm_error: (phi[0].norm_sqr() + phi[1].norm_sqr() - 1.0).abs(),
        trace,
    })
}
