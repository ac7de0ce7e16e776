//! Two-state matrix potentials and their adiabatic decomposition.
//!
//! Every supported potential has the form
//!
//! ```text
//! V(X) = s(X) I + [[ d(X),  o(X) ],
//!                  [ o(X), -d(X) ]]
//! ```
//!
//! so the adiabatic eigenvalues are `s ± sqrt(d² + o²)` and all derivatives
//! follow from closed-form derivatives of the three scalar parts.

use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};

/// Gap `λ+ − λ−` below which the adiabatic eigenvectors are treated as
/// undefined.
pub const DEGENERACY_GAP: f64 = 1e-14;

fn default_alpha() -> f64 {
    std::f64::consts::SQRT_2
}

fn default_beta() -> f64 {
    2.0
}

fn default_eta() -> f64 {
    0.5
}

/// Declarative description of a two-state matrix potential.
///
/// The 2D variants share the scalar surface
/// `λ_s(X) = (X₁² + α X₂²)/2 + β sin(X₁ X₂)`. Setting `eta = 0` in a 2D
/// variant removes the arctan coupling profiles and leaves
/// `V = λ_s I + δ σ_x` (line) or `V = λ_s I` (cone), which is how purely
/// scalar Born-Oppenheimer surfaces are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `V = [[X + r, δ], [δ, −X + r]]` with the quadratic confinement `r(X)`
    /// outside `[a_l, a_r]`.
    OneD { delta: f64, a_l: f64, a_r: f64 },
    /// Surfaces closest along the line `X₁ = 0`.
    TwoDLine {
        delta: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
    /// Conical intersection located at `a`.
    TwoDCone {
        a: [f64; 2],
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
}

/// Real symmetric 2×2 matrix; only the upper triangle is stored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymMat2 {
    pub v11: f64,
    pub v12: f64,
    pub v22: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 {
        v11: 0.0,
        v12: 0.0,
        v22: 0.0,
    };

    pub fn new(v11: f64, v12: f64, v22: f64) -> Self {
        SymMat2 { v11, v12, v22 }
    }

    /// Entry `(i, j)`, zero-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.v11,
            (1, 1) => self.v22,
            _ => self.v12,
        }
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.v11 * v[0] + self.v12 * v[1],
            self.v12 * v[0] + self.v22 * v[1],
        ]
    }

    /// `⟨v, A v⟩`.
    #[inline]
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.v11 * v[0] * v[0] + 2.0 * self.v12 * v[0] * v[1] + self.v22 * v[1] * v[1]
    }

    pub fn add(&self, other: &SymMat2) -> SymMat2 {
        SymMat2::new(self.v11 + other.v11, self.v12 + other.v12, self.v22 + other.v22)
    }

    pub fn shift(&self, c: f64) -> SymMat2 {
        SymMat2::new(self.v11 + c, self.v12, self.v22 + c)
    }
}

/// Eigen-decomposition of a [`SymMat2`] with a fixed sign gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticFrame {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub psi_minus: [f64; 2],
    pub psi_plus: [f64; 2],
    /// Sign applied to the canonical `(minus, plus)` eigenvectors to honour
    /// the gauge.
    pub gauge_sign: [i8; 2],
}

impl AdiabaticFrame {
    pub fn gap(&self) -> f64 {
        self.lambda_plus - self.lambda_minus
    }
}

#[inline]
pub(crate) fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn first_nonzero_positive(v: [f64; 2]) -> bool {
    if v[0] != 0.0 {
        v[0] > 0.0
    } else {
        v[1] >= 0.0
    }
}

/// Diagonalises `v`.
///
/// Without `prev` the sign of each eigenvector makes its first nonzero
/// component positive; with `prev` each sign maximises the overlap with the
/// corresponding vector of `prev`.
pub fn adiabatic_decompose(v: &SymMat2, prev: Option<&AdiabaticFrame>) -> Result<AdiabaticFrame> {
    let s = 0.5 * (v.v11 + v.v22);
    let d = 0.5 * (v.v11 - v.v22);
    let o = v.v12;
    let rho = d.hypot(o);
    if 2.0 * rho < DEGENERACY_GAP {
        return Err(NmdError::DegeneratePoint {
            x: Vec::new(),
            gap: 2.0 * rho,
        });
    }
    let raw = if d >= 0.0 { [d + rho, o] } else { [o, rho - d] };
    let norm = raw[0].hypot(raw[1]);
    let plus = [raw[0] / norm, raw[1] / norm];
    let minus = [-plus[1], plus[0]];

    let sign = |vec: [f64; 2], reference: Option<[f64; 2]>| -> i8 {
        let keep = match reference {
            Some(r) => dot2(vec, r) >= 0.0,
            None => first_nonzero_positive(vec),
        };
        if keep {
            1
        } else {
            -1
        }
    };
    let sm = sign(minus, prev.map(|p| p.psi_minus));
    let sp = sign(plus, prev.map(|p| p.psi_plus));
    let scale = |v: [f64; 2], s: i8| [v[0] * s as f64, v[1] * s as f64];
    Ok(AdiabaticFrame {
        lambda_minus: s - rho,
        lambda_plus: s + rho,
        psi_minus: scale(minus, sm),
        psi_plus: scale(plus, sp),
        gauge_sign: [sm, sp],
    })
}

/// Derivatives of the potential at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGradient {
    /// `∂V/∂X_i`, one matrix per coordinate.
    pub dv: Vec<SymMat2>,
    pub grad_lambda_minus: Vec<f64>,
}

/// Scalar parts `s`, `d`, `o` with first and second derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Parts {
    pub s: f64,
    pub d: f64,
    pub o: f64,
    pub ds: [f64; 2],
    pub dd: [f64; 2],
    pub dov: [f64; 2],
    pub hs: [[f64; 2]; 2],
    pub hd: [[f64; 2]; 2],
    pub ho: [[f64; 2]; 2],
}

impl Parts {
    #[inline]
    pub fn rho(&self) -> f64 {
        self.d.hypot(self.o)
    }

    /// True when the coupling parts vary with X, so the gap closing matters
    /// for λ− derivatives.
    fn coupling_varies(&self) -> bool {
        self.dd != [0.0; 2] || self.dov != [0.0; 2]
    }

    pub fn matrix(&self) -> SymMat2 {
        SymMat2::new(self.s + self.d, self.o, self.s - self.d)
    }

    /// `V − λ− I`.
    pub fn check_matrix(&self) -> SymMat2 {
        let rho = self.rho();
        SymMat2::new(self.d + rho, self.o, rho - self.d)
    }

    pub fn dv(&self, i: usize) -> SymMat2 {
        SymMat2::new(self.ds[i] + self.dd[i], self.dov[i], self.ds[i] - self.dd[i])
    }

    /// `∇ρ`, zero when the coupling parts are constant.
    fn grad_rho(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        if !self.coupling_varies() {
            return Ok([0.0; 2]);
        }
        let rho = self.rho();
        if 2.0 * rho < DEGENERACY_GAP {
            return Err(NmdError::DegeneratePoint {
                x: x.to_vec(),
                gap: 2.0 * rho,
            });
        }
        Ok([
            (self.d * self.dd[0] + self.o * self.dov[0]) / rho,
            (self.d * self.dd[1] + self.o * self.dov[1]) / rho,
        ])
    }

    pub fn grad_lambda_minus(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let gr = self.grad_rho(x)?;
        Ok([self.ds[0] - gr[0], self.ds[1] - gr[1]])
    }

    /// `∂(V − λ− I)/∂X_i`.
    pub fn dv_check(&self, gr: [f64; 2], i: usize) -> SymMat2 {
        SymMat2::new(self.dd[i] + gr[i], self.dov[i], gr[i] - self.dd[i])
    }

    pub fn hess_lambda_minus(&self, x: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let gr = self.grad_rho(x)?;
        let mut h = self.hs;
        if self.coupling_varies() {
            let rho = self.rho();
            for i in 0..2 {
                for j in 0..2 {
                    let hr = (self.dd[i] * self.dd[j]
                        + self.d * self.hd[i][j]
                        + self.dov[i] * self.dov[j]
                        + self.o * self.ho[i][j]
                        - gr[i] * gr[j])
                        / rho;
                    h[i][j] -= hr;
                }
            }
        }
        Ok(h)
    }
}

/// `η·arctan(u/η)` with first and second derivative in `u`; identically zero
/// for `η = 0`.
fn arctan_profile(u: f64, eta: f64) -> (f64, f64, f64) {
    if eta == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let z = u / eta;
    let den = 1.0 + z * z;
    (eta * z.atan(), 1.0 / den, -2.0 * z / (eta * den * den))
}

impl PotentialSpec {
    /// Spatial dimension (1 or 2).
    pub fn dim(&self) -> usize {
        match self {
            PotentialSpec::OneD { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(NmdError::invalid(format!("{name} must be finite")))
            }
        };
        match *self {
            PotentialSpec::OneD { delta, a_l, a_r } => {
                finite("delta", delta)?;
                finite("a_l", a_l)?;
                finite("a_r", a_r)?;
                if delta < 0.0 {
                    return Err(NmdError::invalid("delta must be >= 0"));
                }
                if a_l >= a_r {
                    return Err(NmdError::invalid("a_l must be < a_r"));
                }
            }
            PotentialSpec::TwoDLine { delta, alpha, beta, eta } => {
                for (n, v) in [("delta", delta), ("alpha", alpha), ("beta", beta), ("eta", eta)] {
                    finite(n, v)?;
                }
                if delta < 0.0 {
                    return Err(NmdError::invalid("delta must be >= 0"));
                }
                if eta < 0.0 {
                    return Err(NmdError::invalid("eta must be >= 0"));
                }
            }
            PotentialSpec::TwoDCone { a, alpha, beta, eta } => {
                for (n, v) in [("a1", a[0]), ("a2", a[1]), ("alpha", alpha), ("beta", beta), ("eta", eta)] {
                    finite(n, v)?;
                }
                if eta < 0.0 {
                    return Err(NmdError::invalid("eta must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Pads a coordinate slice to the internal two-component form after
    /// checking its length.
    pub fn point(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.dim() {
            return Err(NmdError::invalid(format!(
                "position has dimension {} but the potential is {}-dimensional",
                x.len(),
                self.dim()
            )));
        }
        Ok(if x.len() == 1 { [x[0], 0.0] } else { [x[0], x[1]] })
    }

    pub(crate) fn parts(&self, x: [f64; 2]) -> Parts {
        match *self {
            PotentialSpec::OneD { delta, a_l, a_r } => {
                let xv = x[0];
                let (r, dr, hr) = if xv < a_l {
                    ((a_l - xv).powi(2), -2.0 * (a_l - xv), 2.0)
                } else if xv > a_r {
                    ((xv - a_r).powi(2), 2.0 * (xv - a_r), 2.0)
                } else {
                    (0.0, 0.0, 0.0)
                };
                Parts {
                    s: r,
                    d: xv,
                    o: delta,
                    ds: [dr, 0.0],
                    dd: [1.0, 0.0],
                    hs: [[hr, 0.0], [0.0, 0.0]],
                    ..Parts::default()
                }
            }
            PotentialSpec::TwoDLine { delta, alpha, beta, eta } => {
                let mut p = scalar_surface(x, alpha, beta);
                let (d, dd, hd) = arctan_profile(x[0], eta);
                p.d = d;
                p.dd = [dd, 0.0];
                p.hd = [[hd, 0.0], [0.0, 0.0]];
                p.o = delta;
                p
            }
            PotentialSpec::TwoDCone { a, alpha, beta, eta } => {
                let mut p = scalar_surface(x, alpha, beta);
                let (d, dd, hd) = arctan_profile(x[0] - a[0], eta);
                let (o, dov, ho) = arctan_profile(x[1] - a[1], eta);
                p.d = d;
                p.dd = [dd, 0.0];
                p.hd = [[hd, 0.0], [0.0, 0.0]];
                p.o = o;
                p.dov = [0.0, dov];
                p.ho = [[0.0, 0.0], [0.0, ho]];
                p
            }
        }
    }

    /// `V(X)`.
    pub fn eval(&self, x: &[f64]) -> Result<SymMat2> {
        Ok(self.parts(self.point(x)?).matrix())
    }

    #[inline]
    pub fn matrix_at(&self, x: [f64; 2]) -> SymMat2 {
        self.parts(x).matrix()
    }

    /// `(λ−, λ+)` at an internal point.
    #[inline]
    pub fn eigenvalues_at(&self, x: [f64; 2]) -> (f64, f64) {
        let p = self.parts(x);
        let rho = p.rho();
        (p.s - rho, p.s + rho)
    }

    #[inline]
    pub fn lambda_minus_at(&self, x: [f64; 2]) -> f64 {
        self.eigenvalues_at(x).0
    }

    pub fn lambda_minus(&self, x: &[f64]) -> Result<f64> {
        Ok(self.lambda_minus_at(self.point(x)?))
    }

    /// Adiabatic frame at `x`, with the position attached to degeneracy
    /// errors.
    pub fn frame_at(&self, x: [f64; 2], prev: Option<&AdiabaticFrame>) -> Result<AdiabaticFrame> {
        adiabatic_decompose(&self.matrix_at(x), prev).map_err(|e| match e {
            NmdError::DegeneratePoint { gap, .. } => NmdError::DegeneratePoint {
                x: x[..self.dim()].to_vec(),
                gap,
            },
            other => other,
        })
    }

    pub fn frame(&self, x: &[f64], prev: Option<&AdiabaticFrame>) -> Result<AdiabaticFrame> {
        self.frame_at(self.point(x)?, prev)
    }

    /// `∇λ−` at an internal point; the unused second component is zero in 1D.
    #[inline]
    pub fn grad_lambda_minus_at(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        self.parts(x).grad_lambda_minus(x)
    }

    pub fn hessian_lambda_minus_at(&self, x: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        self.parts(x).hess_lambda_minus(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<PotentialGradient> {
        let p = self.point(x)?;
        let parts = self.parts(p);
        let g = parts.grad_lambda_minus(p)?;
        let dim = self.dim();
        Ok(PotentialGradient {
            dv: (0..dim).map(|i| parts.dv(i)).collect(),
            grad_lambda_minus: g[..dim].to_vec(),
        })
    }

    /// `λ−(X) ≤ E`.
    pub fn classically_allowed(&self, energy: f64, x: &[f64]) -> Result<bool> {
        Ok(self.lambda_minus(x)? <= energy)
    }

    /// Position of the conical intersection, if the potential has one.
    pub fn conical_point(&self) -> Option<[f64; 2]> {
        match *self {
            PotentialSpec::TwoDCone { a, eta, .. } if eta > 0.0 => Some(a),
            _ => None,
        }
    }
}

fn scalar_surface(x: [f64; 2], alpha: f64, beta: f64) -> Parts {
    let (x1, x2) = (x[0], x[1]);
    let (sn, cs) = (x1 * x2).sin_cos();
    let mixed = beta * (cs - x1 * x2 * sn);
    Parts {
        s: 0.5 * (x1 * x1 + alpha * x2 * x2) + beta * sn,
        ds: [x1 + beta * x2 * cs, alpha * x2 + beta * x1 * cs],
        hs: [
            [1.0 - beta * x2 * x2 * sn, mixed],
            [mixed, alpha - beta * x1 * x1 * sn],
        ],
        ..Parts::default()
    }
}

/// `V(X)` for `spec`.
pub fn eval_potential(spec: &PotentialSpec, x: &[f64]) -> Result<SymMat2> {
    spec.eval(x)
}

/// `∂V/∂X_i` and `∇λ−` for `spec`.
pub fn grad_potential(spec: &PotentialSpec, x: &[f64]) -> Result<PotentialGradient> {
    spec.gradient(x)
}

/// Membership of the classically allowed region `{X : λ−(X) ≤ E}`.
pub fn classically_allowed(spec: &PotentialSpec, energy: f64, x: &[f64]) -> Result<bool> {
    spec.classically_allowed(energy, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const LINE: PotentialSpec = PotentialSpec::TwoDLine {
        delta: 0.1,
        alpha: std::f64::consts::SQRT_2,
        beta: 2.0,
        eta: 0.5,
    };

    fn one_d(delta: f64) -> PotentialSpec {
        PotentialSpec::OneD { delta, a_l: -2.0, a_r: 3.0 }
    }

    #[test]
    fn one_d_inside_plateau() {
        let v = eval_potential(&one_d(0.4), &[0.3]).unwrap();
        assert_abs_diff_eq!(v.v11, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(v.v12, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(v.v22, -0.3, epsilon = 1e-15);
    }

    #[test]
    fn one_d_confinement() {
        let v = eval_potential(&one_d(0.1), &[4.0]).unwrap();
        assert_eq!(v, SymMat2::new(5.0, 0.1, -3.0));
        let v = eval_potential(&one_d(0.1), &[-3.0]).unwrap();
        assert_eq!(v, SymMat2::new(-2.0, 0.1, 4.0));
    }

    #[test]
    fn cone_vanishes_at_origin() {
        let spec = PotentialSpec::TwoDCone {
            a: [0.0, 0.0],
            alpha: std::f64::consts::SQRT_2,
            beta: 2.0,
            eta: 0.5,
        };
        assert_eq!(spec.eval(&[0.0, 0.0]).unwrap(), SymMat2::ZERO);
        assert!(matches!(spec.frame(&[0.0, 0.0], None), Err(NmdError::DegeneratePoint { .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(one_d(0.1).eval(&[0.0, 1.0]), Err(NmdError::InvalidArgument(_))));
        assert!(matches!(LINE.eval(&[0.0]), Err(NmdError::InvalidArgument(_))));
    }

    #[test]
    fn decompose_pythagorean() {
        let f = adiabatic_decompose(&SymMat2::new(0.3, 0.4, -0.3), None).unwrap();
        assert_abs_diff_eq!(f.lambda_plus, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.lambda_minus, -0.5, epsilon = 1e-15);
        let s5 = 5f64.sqrt();
        assert_abs_diff_eq!(f.psi_plus[0], 2.0 / s5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.psi_plus[1], 1.0 / s5, epsilon = 1e-15);
    }

    #[test]
    fn decompose_diagonal_and_offdiagonal() {
        let f = adiabatic_decompose(&SymMat2::new(0.7, 0.0, -0.7), None).unwrap();
        assert_eq!(f.psi_plus, [1.0, 0.0]);
        assert_eq!((f.lambda_minus, f.lambda_plus), (-0.7, 0.7));
        let f = adiabatic_decompose(&SymMat2::new(0.0, 0.25, 0.0), None).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(f.psi_plus[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(f.psi_plus[1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(f.lambda_plus, 0.25, epsilon = 1e-15);
        // first nonzero component positive
        assert!(f.psi_minus[0] > 0.0);
    }

    #[test]
    fn degenerate_matrix_errors() {
        assert!(adiabatic_decompose(&SymMat2::new(1.0, 0.0, 1.0), None).is_err());
    }

    #[test]
    fn gauge_follows_previous_frame() {
        let a = adiabatic_decompose(&SymMat2::new(0.3, 0.4, -0.3), None).unwrap();
        let mut prev = a;
        prev.psi_plus = [-a.psi_plus[0], -a.psi_plus[1]];
        let b = adiabatic_decompose(&SymMat2::new(0.3, 0.4, -0.3), Some(&prev)).unwrap();
        assert_eq!(b.psi_plus, prev.psi_plus);
        assert_eq!(b.gauge_sign[1], -1);
        assert_eq!(b.psi_minus, a.psi_minus);
    }

    #[test]
    fn one_d_gradient() {
        let g = grad_potential(&one_d(0.4), &[0.3]).unwrap();
        assert_eq!(g.dv[0], SymMat2::new(1.0, 0.0, -1.0));
        assert_abs_diff_eq!(g.grad_lambda_minus[0], -0.6, epsilon = 1e-15);
        // plateau: r' = 0, so the trace of dV/dX vanishes
        let g = grad_potential(&one_d(0.4), &[2.5]).unwrap();
        assert_eq!(g.dv[0].v11 + g.dv[0].v22, 0.0);
    }

    #[test]
    fn one_d_crossing_gradient_is_degenerate() {
        assert!(matches!(
            grad_potential(&one_d(0.0), &[0.0]),
            Err(NmdError::DegeneratePoint { .. })
        ));
    }

    fn central_difference(spec: &PotentialSpec, x: [f64; 2], i: usize, step: f64) -> (SymMat2, f64) {
        let mut xp = x;
        let mut xm = x;
        xp[i] += step;
        xm[i] -= step;
        let vp = spec.matrix_at(xp);
        let vm = spec.matrix_at(xm);
        let c = 1.0 / (2.0 * step);
        (
            SymMat2::new((vp.v11 - vm.v11) * c, (vp.v12 - vm.v12) * c, (vp.v22 - vm.v22) * c),
            (spec.lambda_minus_at(xp) - spec.lambda_minus_at(xm)) * c,
        )
    }

    #[test]
    fn line_gradient_at_origin_matches_finite_differences() {
        let g = grad_potential(&LINE, &[0.0, 0.0]).unwrap();
        // ∂λ_s/∂X vanishes at the origin; d(η v₁)/dX₁ = η · (1/η) = 1
        assert_abs_diff_eq!(g.dv[0].v11, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.dv[0].v22, -1.0, epsilon = 1e-15);
        assert_eq!(g.dv[1], SymMat2::ZERO);
        for i in 0..2 {
            let (fd, fdl) = central_difference(&LINE, [0.0, 0.0], i, 1e-6);
            assert_abs_diff_eq!(g.dv[i].v11, fd.v11, epsilon = 1e-8);
            assert_abs_diff_eq!(g.dv[i].v12, fd.v12, epsilon = 1e-8);
            assert_abs_diff_eq!(g.dv[i].v22, fd.v22, epsilon = 1e-8);
            assert_abs_diff_eq!(g.grad_lambda_minus[i], fdl, epsilon = 1e-8);
        }
    }

    #[test]
    fn allowed_region() {
        let spec = PotentialSpec::OneD { delta: 0.1, a_l: -2.0, a_r: 3.0 };
        assert!(classically_allowed(&spec, 1.0, &[0.0]).unwrap());
        assert!(!classically_allowed(&spec, 1.0, &[10.0]).unwrap());
        // harmonic reduction: λ− = |X|²/2, allowed set is the disc |X| ≤ √(2E)
        let harmonic = PotentialSpec::TwoDCone { a: [0.0, 0.0], alpha: 1.0, beta: 0.0, eta: 0.0 };
        let r = 3f64.sqrt();
        assert!(classically_allowed(&harmonic, 1.5, &[r * 0.999, 0.0]).unwrap());
        assert!(classically_allowed(&harmonic, 1.5, &[0.0, -r * 0.999]).unwrap());
        assert!(!classically_allowed(&harmonic, 1.5, &[r * 0.8, r * 0.8]).unwrap());
    }

    #[test]
    fn validation() {
        assert!(PotentialSpec::OneD { delta: -1.0, a_l: 0.0, a_r: 1.0 }.validate().is_err());
        assert!(PotentialSpec::OneD { delta: 1.0, a_l: 2.0, a_r: 1.0 }.validate().is_err());
        assert!(PotentialSpec::TwoDLine { delta: 0.1, alpha: 1.0, beta: 1.0, eta: -0.5 }.validate().is_err());
        assert!(LINE.validate().is_ok());
    }

    fn specs() -> impl Strategy<Value = PotentialSpec> {
        prop_oneof![
            (0.01f64..1.0).prop_map(|delta| PotentialSpec::OneD { delta, a_l: -2.0, a_r: 2.0 }),
            (0.0f64..0.5, 0.1f64..1.0).prop_map(|(delta, eta)| PotentialSpec::TwoDLine {
                delta,
                alpha: std::f64::consts::SQRT_2,
                beta: 2.0,
                eta
            }),
            (-2.0f64..2.0, -2.0f64..2.0, 0.1f64..1.0).prop_map(|(a1, a2, eta)| PotentialSpec::TwoDCone {
                a: [a1, a2],
                alpha: std::f64::consts::SQRT_2,
                beta: 2.0,
                eta
            }),
        ]
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal_eigenbasis(spec in specs(), x1 in -4.0f64..4.0, x2 in -4.0f64..4.0) {
            let x = [x1, x2];
            let v = spec.matrix_at(x);
            prop_assume!(v.v11 != v.v22 || v.v12 != 0.0);
            let f = match spec.frame_at(x, None) { Ok(f) => f, Err(_) => return Ok(()) };
            prop_assert!(f.lambda_plus >= f.lambda_minus);
            prop_assert!((dot2(f.psi_plus, f.psi_plus) - 1.0).abs() < 1e-12);
            prop_assert!((dot2(f.psi_minus, f.psi_minus) - 1.0).abs() < 1e-12);
            prop_assert!(dot2(f.psi_plus, f.psi_minus).abs() < 1e-12);
            for (lam, psi) in [(f.lambda_plus, f.psi_plus), (f.lambda_minus, f.psi_minus)] {
                let r = v.apply(psi);
                let res = ((r[0] - lam * psi[0]).powi(2) + (r[1] - lam * psi[1]).powi(2)).sqrt();
                prop_assert!(res <= 1e-12 * (1.0 + lam.abs()));
            }
        }

        #[test]
        fn gap_bounded_below_by_two_delta(delta in 0.0f64..1.0, x1 in -6.0f64..6.0, x2 in -4.0f64..4.0) {
            let one = PotentialSpec::OneD { delta, a_l: -2.0, a_r: 3.0 };
            let (lm, lp) = one.eigenvalues_at([x1, 0.0]);
            prop_assert!(lp - lm >= 2.0 * delta - 1e-14);
            let line = PotentialSpec::TwoDLine { delta, alpha: std::f64::consts::SQRT_2, beta: 2.0, eta: 0.5 };
            let (lm, lp) = line.eigenvalues_at([x1, x2]);
            prop_assert!(lp - lm >= 2.0 * delta - 1e-14);
        }

        #[test]
        fn gradient_matches_finite_differences(spec in specs(), x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
            let x = [x1, if spec.dim() == 1 { 0.0 } else { x2 }];
            prop_assume!(spec.eigenvalues_at(x).1 - spec.eigenvalues_at(x).0 > 1e-2);
            let p = spec.parts(x);
            let g = p.grad_lambda_minus(x).unwrap();
            for i in 0..spec.dim() {
                let (fd, fdl) = central_difference(&spec, x, i, 1e-6);
                let dv = p.dv(i);
                for (a, b) in [(dv.v11, fd.v11), (dv.v12, fd.v12), (dv.v22, fd.v22), (g[i], fdl)] {
                    prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn hessian_matches_finite_differences(spec in specs(), x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
            let x = [x1, if spec.dim() == 1 { 0.0 } else { x2 }];
            prop_assume!(spec.eigenvalues_at(x).1 - spec.eigenvalues_at(x).0 > 5e-2);
            if let PotentialSpec::OneD { a_l, a_r, .. } = spec {
                prop_assume!((x1 - a_l).abs() > 1e-3 && (x1 - a_r).abs() > 1e-3);
            }
            let h = spec.hessian_lambda_minus_at(x).unwrap();
            let step = 1e-5;
            for i in 0..spec.dim() {
                let mut xp = x; xp[i] += step;
                let mut xm = x; xm[i] -= step;
                let gp = spec.grad_lambda_minus_at(xp).unwrap();
                let gm = spec.grad_lambda_minus_at(xm).unwrap();
                for j in 0..spec.dim() {
                    let fd = (gp[j] - gm[j]) / (2.0 * step);
                    prop_assert!((h[j][i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{} vs {}", h[j][i], fd);
                }
            }
        }

        #[test]
        fn gauge_continuity_along_path(spec in specs(), x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, angle in 0.0f64..6.28) {
            let step = 1e-3;
            let dir = [angle.cos(), angle.sin()];
            let mut prev: Option<AdiabaticFrame> = None;
            for k in 0..200 {
                let x = [x1 + k as f64 * step * dir[0], if spec.dim() == 1 { 0.0 } else { x2 + k as f64 * step * dir[1] }];
                let Ok(f) = spec.frame_at(x, prev.as_ref()) else { return Ok(()) };
                if f.gap() < 1e-2 { return Ok(()); }
                if let Some(p) = prev {
                    prop_assert!(dot2(p.psi_plus, f.psi_plus) > 0.0);
                    prop_assert!(dot2(p.psi_minus, f.psi_minus) > 0.0);
                }
                prev = Some(f);
            }
        }
    }
}
