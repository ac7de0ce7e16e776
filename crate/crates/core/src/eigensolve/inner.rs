//! Linear solvers for the shifted systems `(H − σI) x = b`.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use serde::{Deserialize, Serialize};

use super::hamiltonian::SparseHamiltonian;
use crate::error::{NmdError, Result};

/// Method used for the inner solves of shift-invert Lanczos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum InnerSolver {
    /// Sparse LU factorisation with partial pivoting, computed once per shift.
    SparseLu,
    /// Unpreconditioned MINRES, tolerant of the indefinite shifted operator.
    Minres { max_iter: usize },
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver::SparseLu
    }
}

pub(crate) trait ShiftInvert {
    fn solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<()>;
}

pub(crate) struct LuShiftInvert {
    lu: Lu<usize, f64>,
}

impl LuShiftInvert {
    pub fn new(h: &SparseHamiltonian, sigma: f64) -> Result<Self> {
        let m = h.shifted_full(sigma)?;
        let lu = m
            .sp_lu()
            .map_err(|e| NmdError::invalid(format!("sparse LU failed for shift {sigma}: {e:?}")))?;
        Ok(LuShiftInvert { lu })
    }
}

impl ShiftInvert for LuShiftInvert {
    fn solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<()> {
        x.copy_from_slice(b);
        let n = x.len();
        self.lu.solve_in_place(faer::mat::from_column_major_slice_mut::<f64, usize, usize>(x, n, 1));
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NmdError::invalid("shifted operator is numerically singular"))
        }
    }
}

pub(crate) struct MinresShiftInvert<'a> {
    h: &'a SparseHamiltonian,
    sigma: f64,
    rtol: f64,
    max_iter: usize,
}

impl<'a> MinresShiftInvert<'a> {
    pub fn new(h: &'a SparseHamiltonian, sigma: f64, rtol: f64, max_iter: usize) -> Self {
        MinresShiftInvert { h, sigma, rtol, max_iter }
    }
}

impl ShiftInvert for MinresShiftInvert<'_> {
    fn solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let (h, sigma) = (self.h, self.sigma);
        let op = |v: &[f64], out: &mut [f64]| {
            h.matvec(v, out);
            out.iter_mut().zip(v).for_each(|(o, vi)| *o -= sigma * vi);
        };
        let (_, relres) = minres(op, b, x, self.rtol, self.max_iter);
        if relres.is_finite() {
            Ok(())
        } else {
            Err(NmdError::invalid("MINRES produced a non-finite iterate"))
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// MINRES for a symmetric, possibly indefinite operator, starting from zero.
///
/// Returns the iteration count and the final relative residual estimate.
pub fn minres<F>(op: F, b: &[f64], x: &mut [f64], rtol: f64, max_iter: usize) -> (usize, f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let beta1 = dot(b, b).sqrt();
    if beta1 == 0.0 {
        return (0, 0.0);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        op(&v, &mut y);
        if itn >= 2 {
            let c = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(yi, ri)| *yi -= c * ri);
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(yi, ri)| *yi -= c * ri);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = dot(&r2, &r2).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        let relres = phibar / beta1;
        if relres <= rtol || beta == 0.0 {
            return (itn, relres);
        }
    }
    (max_iter, phibar / beta1)
}
