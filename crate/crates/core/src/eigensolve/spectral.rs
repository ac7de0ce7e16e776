//! Spectral estimators: excited-state probability, Schrödinger observables
//! and the resonance estimate of the excited-state probability.

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::hamiltonian::assemble_scalar;
use super::{eigs_near, sturm, EigenPair, EigsOptions};
use crate::dynamics::landau_zener_energy;
use crate::error::{NmdError, Result};
use crate::model::PotentialSpec;

/// Fraction of nodes that may be skipped as degenerate before the result is
/// flagged.
const EXCLUSION_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitedProbability {
    pub p_e: f64,
    /// Nodes skipped because the eigenvalue gap vanishes there.
    pub excluded_nodes: usize,
    /// More than 0.1% of the nodes were excluded.
    pub flagged: bool,
}

/// Weight of the excited adiabatic component in a two-state eigenvector.
pub fn excited_probability(pair: &EigenPair, spec: &PotentialSpec, grid: &Grid) -> Result<ExcitedProbability> {
    if pair.components != 2 || pair.vector.len() != 2 * grid.node_count() {
        return Err(NmdError::invalid("eigenvector does not match a two-state problem on this grid"));
    }
    let (mut num, mut den, mut excluded) = (0.0, 0.0, 0);
    for node in 0..grid.node_count() {
        let frame = match spec.frame_at(grid.coords(node), None) {
            Ok(f) => f,
            Err(NmdError::DegeneratePoint { .. }) => {
                excluded += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let phi = pair.at(node);
        let c = phi[0] * frame.psi_plus[0] + phi[1] * frame.psi_plus[1];
        num += c * c;
        den += phi[0] * phi[0] + phi[1] * phi[1];
    }
    if den == 0.0 {
        return Err(NmdError::invalid("eigenvector vanishes on every usable node"));
    }
    Ok(ExcitedProbability {
        p_e: (num / den).clamp(0.0, 1.0),
        excluded_nodes: excluded,
        flagged: excluded as f64 > EXCLUSION_WARN_FRACTION * grid.node_count() as f64,
    })
}

/// `Σ g ρ / Σ ρ` with the position density `ρ = |Φ|²` at the nodes.
pub fn schrodinger_observable<G>(pair: &EigenPair, g: G, grid: &Grid) -> f64
where
    G: Fn([f64; 2]) -> f64,
{
    let (mut num, mut den) = (0.0, 0.0);
    for node in 0..grid.node_count() {
        let phi = pair.at(node);
        let rho = phi[0] * phi[0] + phi[1] * phi[1];
        num += g(grid.coords(node)) * rho;
        den += rho;
    }
    num / den
}

/// Which adiabatic surface drives a scalar problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Minus,
    Plus,
}

/// Eigenvalues of `−(1/2M) Δ_h + λ_±` inside `[lo, hi)`, ascending.
pub fn scalar_spectra(
    grid: &Grid,
    spec: &PotentialSpec,
    mass: f64,
    branch: Branch,
    window: (f64, f64),
    opts: &EigsOptions,
) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(NmdError::invalid(format!("empty energy window [{lo}, {hi})")));
    }
    let h = assemble_scalar(grid, mass, |x| {
        let (m, p) = spec.eigenvalues_at(x);
        match branch {
            Branch::Minus => m,
            Branch::Plus => p,
        }
    });
    if grid.dim() == 1 {
        let n = h.size();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for a in 0..n {
            for (c, v) in h.row(a) {
                if c == a {
                    diag[a] = v;
                } else {
                    off[a] = v;
                }
            }
        }
        return Ok(sturm::eigenvalues_in(&diag, &off, lo, hi));
    }
    // 2D: grow the number of requested pairs until one falls outside the window
    let sigma = 0.5 * (lo + hi);
    let mut k = 16.min(h.size());
    loop {
        let pairs = eigs_near(&h, sigma, k, opts)?;
        let reach = pairs.iter().map(|p| (p.energy - sigma).abs()).fold(0.0, f64::max);
        if reach >= 0.5 * (hi - lo) || k == h.size() {
            let mut e: Vec<f64> =
                pairs.into_iter().map(|p| p.energy).filter(|e| *e >= lo && *e < hi).collect();
            e.sort_by(f64::total_cmp);
            return Ok(e);
        }
        k = (2 * k).min(h.size());
    }
}

/// The three eigenvalues entering the resonance estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceTerms {
    /// Minus-eigenvalue nearest `E`.
    pub e_l: f64,
    /// Nearest other minus-eigenvalue to `e_l`.
    pub e_m: f64,
    /// Plus-eigenvalue nearest `e_l`.
    pub e_plus: f64,
}

impl ResonanceTerms {
    /// `|E_l − E_+|² / |E_l − E_m|²`.
    pub fn gap_ratio(&self) -> f64 {
        (self.e_l - self.e_plus).powi(2) / (self.e_l - self.e_m).powi(2)
    }
}

fn nearest(values: &[f64], target: f64, skip: Option<f64>) -> Option<f64> {
    values
        .iter()
        .copied()
        .filter(|v| skip != Some(*v))
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()).then(a.total_cmp(b)))
}

pub fn resonance_terms(energy: f64, minus: &[f64], plus: &[f64]) -> Result<ResonanceTerms> {
    let e_l = nearest(minus, energy, None).ok_or_else(|| NmdError::invalid("empty minus spectrum"))?;
    let e_m = nearest(minus, e_l, Some(e_l))
        .ok_or_else(|| NmdError::invalid("minus spectrum needs two distinct eigenvalues"))?;
    let e_plus = nearest(plus, e_l, None).ok_or_else(|| NmdError::invalid("empty plus spectrum"))?;
    Ok(ResonanceTerms { e_l, e_m, e_plus })
}

/// `p̂_e = p_LZ / (C⁻¹ |E_l − E_+|² / |E_l − E_m|² + p_LZ)`.
pub fn resonance_estimate(
    energy: f64,
    minus: &[f64],
    plus: &[f64],
    delta: f64,
    mass: f64,
    lambda_minus_0: f64,
    c: f64,
) -> Result<f64> {
    if !(c > 0.0) {
        return Err(NmdError::invalid("C must be positive"));
    }
    let terms = resonance_terms(energy, minus, plus)?;
    let p_lz = landau_zener_energy(delta, mass, energy, lambda_minus_0)?;
    Ok(estimate_from(p_lz, terms.gap_ratio(), c))
}

fn estimate_from(p_lz: f64, gap_ratio: f64, c: f64) -> f64 {
    let den = gap_ratio / c + p_lz;
    if den == 0.0 {
        // exact resonance with p_LZ = 0 has no preferred value; take the
        // resonant limit
        return 1.0;
    }
    (p_lz / den).clamp(0.0, 1.0)
}

/// Piecewise constant function of energy: `values[i]` applies on
/// `[breakpoints[i-1], breakpoints[i])`, open-ended at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        PiecewiseConstant { breakpoints: Vec::new(), values: vec![value] }
    }

    pub fn segment(&self, e: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= e)
    }

    pub fn value_at(&self, e: f64) -> f64 {
        self.values[self.segment(e)]
    }
}

/// One energy with its computed `p_e` and the ingredients of `p̂_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceSample {
    pub energy: f64,
    pub p_e: f64,
    pub p_lz: f64,
    pub gap_ratio: f64,
}

/// Least-squares fit of a piecewise constant `C` by golden-section search
/// over `log10 C ∈ [−6, 6]` on each segment.
///
/// A segment whose objective does not depend on `C` gets `C = 1`.
pub fn fit_c(samples: &[ResonanceSample], breakpoints: &[f64]) -> Result<PiecewiseConstant> {
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(NmdError::invalid("breakpoints must be strictly increasing"));
    }
    let shape = PiecewiseConstant { breakpoints: breakpoints.to_vec(), values: vec![1.0; breakpoints.len() + 1] };
    let mut values = Vec::with_capacity(shape.values.len());
    for seg in 0..shape.values.len() {
        let data: Vec<&ResonanceSample> = samples.iter().filter(|s| shape.segment(s.energy) == seg).collect();
        if data.is_empty() {
            return Err(NmdError::invalid(format!("no samples in segment {seg} of the C fit")));
        }
        let objective = |u: f64| {
            let c = 10f64.powf(u);
            data.iter().map(|s| (s.p_e - estimate_from(s.p_lz, s.gap_ratio, c)).powi(2)).sum::<f64>()
        };
        values.push(10f64.powf(golden_section(objective, -6.0, 6.0)));
    }
    Ok(PiecewiseConstant { values, ..shape })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
    if fa == fm && fm == fb {
        return 0.5 * (lo + hi);
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // the bracket ends can beat the interior when the minimum sits on the boundary
    [(lo, fa), (hi, fb), (mid, f(mid))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|x| x.0)
        .unwrap()
}
