//! Thick-restart shift-invert Lanczos with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::hamiltonian::SparseHamiltonian;
use super::inner::{InnerSolver, LuShiftInvert, MinresShiftInvert, ShiftInvert};
use super::{EigenPair, EigsOptions};
use crate::error::{NmdError, Result};
use crate::rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Orthogonalizes `w` against `basis` twice, returning the accumulated
/// projection coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coef.iter_mut().zip(basis) {
            let p = dot(v, w);
            axpy(-p, v, w);
            *c += p;
        }
    }
    coef
}

/// The `k` eigenpairs of `h` closest to `sigma`, sorted by distance.
pub fn eigs_near(h: &SparseHamiltonian, sigma: f64, k: usize, opts: &EigsOptions) -> Result<Vec<EigenPair>> {
    let n = h.size();
    if k == 0 || k > n {
        return Err(NmdError::invalid(format!("requested {k} eigenpairs of a {n}×{n} matrix")));
    }
    if !(opts.tol > 0.0) || !sigma.is_finite() {
        return Err(NmdError::invalid("tolerance must be positive and the shift finite"));
    }
    let mut last_err = None;
    for attempt in 0..4 {
        let shift = sigma + attempt as f64 * opts.tol * sigma.abs().max(1.0);
        let result = match opts.inner {
            InnerSolver::SparseLu => match LuShiftInvert::new(h, shift) {
                Ok(mut op) => lanczos(h, shift, k, opts, &mut op),
                Err(e) => Err(e),
            },
            InnerSolver::Minres { max_iter } => {
                let mut op = MinresShiftInvert::new(h, shift, 1e-2 * opts.tol, max_iter);
                lanczos(h, shift, k, opts, &mut op)
            }
        };
        match result {
            Ok(mut pairs) => {
                pairs.sort_by(|a, b| {
                    let (da, db) = ((a.energy - sigma).abs(), (b.energy - sigma).abs());
                    da.total_cmp(&db).then(a.energy.total_cmp(&b.energy))
                });
                return Ok(pairs);
            }
            // only a singular shifted operator is worth a perturbed retry
            Err(e @ NmdError::InvalidArgument(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt was made"))
}

fn lanczos(
    h: &SparseHamiltonian,
    sigma: f64,
    k: usize,
    opts: &EigsOptions,
    op: &mut dyn ShiftInvert,
) -> Result<Vec<EigenPair>> {
    let n = h.size();
    let m_max = opts.basis_size(k).min(n);
    let keep = (k + (m_max - k) / 3).min(m_max - 1).max(k.min(m_max - 1));
    let max_apply = if opts.max_iter == 0 { 100 * m_max.max(50) } else { opts.max_iter };
    let h_norm = h.norm_bound(sigma);
    let mut random = rng::stream(opts.seed, 0);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max + 1);
    // projected operator, row-major m_max × m_max
    let mut t = vec![vec![0.0; m_max]; m_max];
    let mut next: Vec<f64> = (0..n).map(|_| random.gen::<f64>() - 0.5).collect();
    let nv = norm(&next);
    next.iter_mut().for_each(|x| *x /= nv);

    let mut applied = 0;
    let mut worst = f64::INFINITY;
    let mut converged = 0;
    let mut w = vec![0.0; n];
    // coupling of the last basis vector to the pending residual `next`
    let mut beta_m = 0.0;
    loop {
        // expand
        while basis.len() < m_max {
            let j = basis.len();
            basis.push(std::mem::take(&mut next));
            op.solve(&basis[j], &mut w)?;
            applied += 1;
            let coef = orthogonalize(&basis, &mut w);
            for (i, c) in coef.iter().enumerate() {
                // keep the projection symmetric: trust the upper triangle for the
                // new column, mirror it into the row
                t[i][j] = *c;
                t[j][i] = *c;
            }
            let mut beta = norm(&w);
            if beta <= 1e-12 * coef[j].abs().max(1e-300) {
                // invariant subspace: continue with a fresh random direction
                w.iter_mut().for_each(|x| *x = random.gen::<f64>() - 0.5);
                orthogonalize(&basis, &mut w);
                let nw = norm(&w);
                w.iter_mut().for_each(|x| *x /= nw);
                beta = 0.0;
                next = w.clone();
            } else {
                next = w.iter().map(|x| x / beta).collect();
            }
            if j + 1 < m_max {
                t[j + 1][j] = beta;
                t[j][j + 1] = beta;
            } else {
                beta_m = beta;
            }
        }
        let m = basis.len();
        let tm = DMatrix::from_fn(m, m, |i, j| 0.5 * (t[i][j] + t[j][i]));
        let eig = SymmetricEigen::new(tm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));

        // cheap screen on the k wanted Ritz pairs
        let screen_ok = order[..k].iter().all(|&i| {
            let theta = eig.eigenvalues[i];
            let s_last = eig.eigenvectors[(m - 1, i)];
            h_norm * (beta_m * s_last).abs() / theta.abs() <= opts.tol
        });
        if screen_ok || applied >= max_apply {
            let pairs: Vec<EigenPair> = order[..k]
                .iter()
                .map(|&i| ritz_pair(h, &basis, eig.eigenvectors.column(i).as_slice()))
                .collect();
            worst = pairs.iter().map(|p| p.residual_norm).fold(0.0, f64::max);
            converged = pairs.iter().filter(|p| p.residual_norm <= opts.tol).count();
            if converged == k {
                return Ok(pairs);
            }
        }
        if applied >= max_apply {
            return Err(NmdError::SolverFailure { iterations: applied, converged, wanted: k, worst_residual: worst });
        }

        // thick restart on the `keep` dominant Ritz vectors
        let kept: Vec<usize> = order[..keep].to_vec();
        let new_basis: Vec<Vec<f64>> = kept
            .iter()
            .map(|&i| {
                let s = eig.eigenvectors.column(i);
                let mut y = vec![0.0; n];
                for (v, si) in basis.iter().zip(s.iter()) {
                    axpy(*si, v, &mut y);
                }
                y
            })
            .collect();
        basis = new_basis;
        for row in t.iter_mut() {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        for (a, &i) in kept.iter().enumerate() {
            t[a][a] = eig.eigenvalues[i];
            if keep < m_max {
                let c = beta_m * eig.eigenvectors[(m - 1, i)];
                t[a][keep] = c;
                t[keep][a] = c;
            }
        }
    }
}

fn ritz_pair(h: &SparseHamiltonian, basis: &[Vec<f64>], s: &[f64]) -> EigenPair {
    let n = h.size();
    let mut y = vec![0.0; n];
    for (v, si) in basis.iter().zip(s) {
        axpy(*si, v, &mut y);
    }
    let ny = norm(&y);
    y.iter_mut().for_each(|x| *x /= ny);
    let mut hy = vec![0.0; n];
    h.matvec(&y, &mut hy);
    let energy = dot(&y, &hy);
    axpy(-energy, &y, &mut hy);
    let residual_norm = norm(&hy);
    let scale = 1.0 / h.cell_volume.sqrt();
    y.iter_mut().for_each(|x| *x *= scale);
    let norm = (y.iter().map(|x| x * x).sum::<f64>() * h.cell_volume).sqrt();
    EigenPair { energy, vector: y, residual_norm, norm, components: h.components }
}
