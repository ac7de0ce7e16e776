use faer::sparse::SparseColMat;

use super::grid::Grid;
use crate::error::{NmdError, Result};
use crate::model::{PotentialSpec, SymMat2};

/// Symmetric finite-difference Hamiltonian `−(1/2M) Δ_h + V` with Dirichlet
/// boundaries.
///
/// Only the upper triangle (including the diagonal) is stored, in compressed
/// row form. Unknowns are ordered node-major with the electronic components
/// fastest: dof `components · node + c`.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub components: usize,
    pub mass: f64,
    /// Quadrature weight of one node.
    pub cell_volume: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    /// Number of unknowns.
    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz_upper(&self) -> usize {
        self.vals.len()
    }

    /// Upper-triangle entries of row `a` as `(column, value)`.
    pub fn row(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..self.size() {
            let xa = x[a];
            let mut acc = 0.0;
            for (c, v) in self.row(a) {
                acc += v * x[c];
                if c != a {
                    y[c] += v * xa;
                }
            }
            y[a] += acc;
        }
    }

    /// Upper bound on `‖H − σI‖₂` from row sums.
    pub fn norm_bound(&self, sigma: f64) -> f64 {
        let mut sums = vec![0.0; self.size()];
        for a in 0..self.size() {
            for (c, v) in self.row(a) {
                if c == a {
                    sums[a] += (v - sigma).abs();
                } else {
                    sums[a] += v.abs();
                    sums[c] += v.abs();
                }
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Full (both triangles) column-compressed copy of `H − σI`.
    pub fn shifted_full(&self, sigma: f64) -> Result<SparseColMat<usize, f64>> {
        let mut triplets = Vec::with_capacity(2 * self.nnz_upper());
        for a in 0..self.size() {
            for (c, v) in self.row(a) {
                if c == a {
                    triplets.push((a, a, v - sigma));
                } else {
                    triplets.push((a, c, v));
                    triplets.push((c, a, v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.size(), self.size(), &triplets)
            .map_err(|e| NmdError::invalid(format!("sparse assembly failed: {e:?}")))
    }

    /// Dense copy, for small test problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut d = vec![vec![0.0; n]; n];
        for a in 0..n {
            for (c, v) in self.row(a) {
                d[a][c] = v;
                d[c][a] = v;
            }
        }
        d
    }
}

/// Assembles `−(1/2M) Δ_h I₂ + V(X)` for an arbitrary symmetric 2×2 block
/// potential evaluated at the grid nodes.
pub fn assemble_with<F>(grid: &Grid, mass: f64, block: F) -> SparseHamiltonian
where
    F: Fn([f64; 2]) -> SymMat2,
{
    assemble_generic(grid, mass, 2, |x| {
        let v = block(x);
        [v.v11, v.v12, v.v22]
    })
}

/// Two-state Hamiltonian for `spec`.
pub fn assemble_hamiltonian(grid: &Grid, spec: &PotentialSpec, mass: f64) -> Result<SparseHamiltonian> {
    if grid.dim() != spec.dim() {
        return Err(NmdError::invalid("grid and potential dimensions differ"));
    }
    Ok(assemble_with(grid, mass, |x| spec.matrix_at(x)))
}

/// Scalar Hamiltonian `−(1/2M) Δ_h + U(X)`.
pub fn assemble_scalar<F>(grid: &Grid, mass: f64, potential: F) -> SparseHamiltonian
where
    F: Fn([f64; 2]) -> f64,
{
    assemble_generic(grid, mass, 1, |x| [potential(x), 0.0, 0.0])
}

fn assemble_generic<F>(grid: &Grid, mass: f64, components: usize, block: F) -> SparseHamiltonian
where
    F: Fn([f64; 2]) -> [f64; 3],
{
    let nodes = grid.node_count();
    let kin: Vec<f64> = grid.axes.iter().map(|a| 1.0 / (2.0 * mass * a.h * a.h)).collect();
    let kin_diag: f64 = kin.iter().map(|k| 2.0 * k).sum();
    // stride in nodes of a +1 step along each axis
    let strides: Vec<usize> = match grid.axes.as_slice() {
        [_] => vec![1],
        [_, b] => vec![b.n, 1],
        _ => unreachable!(),
    };
    let size = components * nodes;
    let mut row_ptr = Vec::with_capacity(size + 1);
    let mut cols = Vec::with_capacity(size * 4);
    let mut vals = Vec::with_capacity(size * 4);
    row_ptr.push(0);
    for node in 0..nodes {
        let x = grid.coords(node);
        let [v11, v12, v22] = block(x);
        for c in 0..components {
            let a = components * node + c;
            cols.push(a);
            vals.push(kin_diag + if c == 0 { v11 } else { v22 });
            if components == 2 && c == 0 && v12 != 0.0 {
                cols.push(a + 1);
                vals.push(v12);
            }
            // neighbours with larger index, sorted by column: innermost axis first
            for axis in (0..grid.dim()).rev() {
                let pos = match grid.dim() {
                    1 => node,
                    _ if axis == 0 => node / grid.axes[1].n,
                    _ => node % grid.axes[1].n,
                };
                if pos + 1 < grid.axes[axis].n {
                    cols.push(components * (node + strides[axis]) + c);
                    vals.push(-kin[axis]);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    SparseHamiltonian {
        components,
        mass,
        cell_volume: grid.cell_volume(),
        row_ptr,
        cols,
        vals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::grid::{build_grid, GridPreset};

    fn explicit(h: f64, domain: Vec<[f64; 2]>) -> GridPreset {
        GridPreset::Explicit { h, domain }
    }

    #[test]
    fn one_d_stencil_and_blocks() {
        let spec = PotentialSpec::OneD { delta: 0.2, a_l: -2.0, a_r: 2.0 };
        let grid = build_grid(&spec, 1.0, &explicit(0.5, vec![[-1.0, 1.0]])).unwrap();
        let h = assemble_hamiltonian(&grid, &spec, 2.0).unwrap();
        assert_eq!(h.size(), 6);
        let d = h.to_dense();
        let k = 1.0 / (2.0 * 2.0 * 0.25);
        // node 0 at X = −0.5
        assert!((d[0][0] - (2.0 * k - 0.5)).abs() < 1e-15);
        assert!((d[1][1] - (2.0 * k + 0.5)).abs() < 1e-15);
        assert_eq!(d[0][1], 0.2);
        assert_eq!(d[0][2], -k);
        assert_eq!(d[1][3], -k);
        assert_eq!(d[0][3], 0.0);
        assert_eq!(d[0][4], 0.0);
    }

    #[test]
    fn symmetric_and_matvec_consistent() {
        let spec = PotentialSpec::TwoDCone { a: [0.3, -0.2], alpha: 1.4, beta: 2.0, eta: 0.5 };
        let grid = build_grid(&spec, 1.0, &explicit(0.5, vec![[-2.0, 2.0], [-1.5, 2.0]])).unwrap();
        let h = assemble_hamiltonian(&grid, &spec, 3.0).unwrap();
        let d = h.to_dense();
        let n = h.size();
        let mut asym: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                asym = asym.max((d[a][b] - d[b][a]).abs());
            }
        }
        assert_eq!(asym, 0.0);
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let mut y = vec![0.0; n];
        h.matvec(&x, &mut y);
        for a in 0..n {
            let expect: f64 = (0..n).map(|b| d[a][b] * x[b]).sum();
            assert!((expect - y[a]).abs() < 1e-12);
        }
        // 5-point stencil: each node couples to at most 4 neighbours + partner component
        for a in 0..n {
            let nz = (0..n).filter(|&b| d[a][b] != 0.0).count();
            assert!(nz <= 6);
        }
    }
}
