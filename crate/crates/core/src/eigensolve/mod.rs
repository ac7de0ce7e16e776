//! Discrete Schrödinger eigenproblems and the spectral estimators built on them.

mod dump;
mod grid;
mod hamiltonian;
mod inner;
mod lanczos;
mod spectral;
pub mod sturm;

pub use dump::{read_eigenvector, write_eigenvector};
pub use grid::{build_grid, Axis, Grid, GridPreset};
pub use hamiltonian::{assemble_hamiltonian, assemble_scalar, assemble_with, SparseHamiltonian};
pub use inner::{minres, InnerSolver};
pub use lanczos::eigs_near;
pub use spectral::{
    excited_probability, fit_c, resonance_estimate, resonance_terms, scalar_spectra, schrodinger_observable,
    Branch, ExcitedProbability, PiecewiseConstant, ResonanceSample, ResonanceTerms,
};

use serde::{Deserialize, Serialize};

/// An eigenvalue with its grid eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    /// `components` values per grid node, node-major.
    pub vector: Vec<f64>,
    /// `‖HΦ − EΦ‖₂ / ‖Φ‖₂`.
    pub residual_norm: f64,
    /// Quadrature norm `(Σ Φ² h^dim)^{1/2}`, 1 for solver output.
    pub norm: f64,
    pub components: usize,
}

impl EigenPair {
    /// The electronic 2-vector at `node` (second entry 0 for scalar problems).
    pub fn at(&self, node: usize) -> [f64; 2] {
        match self.components {
            1 => [self.vector[node], 0.0],
            _ => [self.vector[2 * node], self.vector[2 * node + 1]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigsOptions {
    /// Residual tolerance on `‖HΦ − EΦ‖₂ / ‖Φ‖₂`.
    pub tol: f64,
    /// Cap on shift-invert applications; 0 picks a size-dependent limit.
    pub max_iter: usize,
    /// Seed of the random starting vector.
    pub seed: u64,
    /// Krylov basis size before a restart; 0 picks `max(2k + 20, 40)`.
    pub basis: usize,
    pub inner: InnerSolver,
}

impl Default for EigsOptions {
    fn default() -> Self {
        EigsOptions { tol: 1e-8, max_iter: 0, seed: 0, basis: 0, inner: InnerSolver::SparseLu }
    }
}

impl EigsOptions {
    pub(crate) fn basis_size(&self, k: usize) -> usize {
        if self.basis > k {
            self.basis
        } else {
            (2 * k + 20).max(40)
        }
    }
}
