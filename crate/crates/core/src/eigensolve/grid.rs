use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};
use crate::model::PotentialSpec;

/// How the mesh is chosen for a given mass ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridPreset {
    /// Domain (−2π, 2π), `⌈10 M^{3/4}⌉` intervals.
    Standard1d,
    /// Domain [−4, 4]², mesh size nearest `1/(2√M)`.
    Standard2d,
    /// Domain [−4, 4]², mesh size nearest `1/(4√M)`.
    Fine2d,
    /// Mesh size nearest `h` dividing each interval of `domain` exactly.
    Explicit { h: f64, domain: Vec<[f64; 2]> },
}

/// One axis of a uniform grid; only interior nodes carry unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    /// Interior node count.
    pub n: usize,
    pub h: f64,
}

impl Axis {
    pub fn from_intervals(lo: f64, hi: f64, intervals: usize) -> Result<Axis> {
        if intervals < 4 {
            return Err(NmdError::invalid(format!(
                "grid axis [{lo}, {hi}] would have {} interior points, need at least 3",
                intervals.saturating_sub(1)
            )));
        }
        Ok(Axis {
            lo,
            hi,
            n: intervals - 1,
            h: (hi - lo) / intervals as f64,
        })
    }

    /// Coordinate of interior node `j` (zero-based), i.e. `lo + (j + 1) h`.
    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.lo + (j + 1) as f64 * self.h
    }
}

/// Uniform finite-difference grid with homogeneous Dirichlet boundaries.
///
/// Nodes are numbered row-major: in 2D node `(j, k)` along `(X₁, X₂)` has
/// index `j · n₂ + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Quadrature weight of one node, `Π h_i`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h).product()
    }

    /// Coordinates of a node, padded to two components.
    #[inline]
    pub fn coords(&self, node: usize) -> [f64; 2] {
        match self.axes.as_slice() {
            [a] => [a.node(node), 0.0],
            [a, b] => [a.node(node / b.n), b.node(node % b.n)],
            _ => unreachable!("grids are 1D or 2D"),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }
}

fn snap_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Builds the grid prescribed by `preset` for mass ratio `mass`.
pub fn build_grid(spec: &PotentialSpec, mass: f64, preset: &GridPreset) -> Result<Grid> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(NmdError::invalid("mass ratio M must be positive"));
    }
    let dim = spec.dim();
    let require_dim = |want: usize, name: &str| {
        if dim != want {
            Err(NmdError::invalid(format!("grid preset {name} needs a {want}D potential")))
        } else {
            Ok(())
        }
    };
    let square = |h_nominal: f64| -> Result<Grid> {
        let intervals = ((8.0 / h_nominal).round() as usize).max(1);
        let axis = Axis::from_intervals(-4.0, 4.0, intervals)?;
        Ok(Grid { axes: vec![axis, axis] })
    };
    match preset {
        GridPreset::Standard1d => {
            require_dim(1, "standard1d")?;
            let intervals = snap_ceil(10.0 * mass.powf(0.75));
            let two_pi = 2.0 * std::f64::consts::PI;
            Ok(Grid {
                axes: vec![Axis::from_intervals(-two_pi, two_pi, intervals)?],
            })
        }
        GridPreset::Standard2d => {
            require_dim(2, "standard2d")?;
            square(1.0 / (2.0 * mass.sqrt()))
        }
        GridPreset::Fine2d => {
            require_dim(2, "fine2d")?;
            square(1.0 / (4.0 * mass.sqrt()))
        }
        GridPreset::Explicit { h, domain } => {
            if !(*h > 0.0) {
                return Err(NmdError::invalid("mesh size h must be positive"));
            }
            if domain.len() != dim {
                return Err(NmdError::invalid(format!(
                    "explicit grid has {} axes but the potential is {dim}-dimensional",
                    domain.len()
                )));
            }
            let axes = domain
                .iter()
                .map(|&[lo, hi]| {
                    if !(hi > lo) {
                        return Err(NmdError::invalid("grid interval must have hi > lo"));
                    }
                    let intervals = (((hi - lo) / h).round() as usize).max(1);
                    Axis::from_intervals(lo, hi, intervals)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Grid { axes })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_D: PotentialSpec = PotentialSpec::OneD { delta: 0.1, a_l: -2.0, a_r: 3.0 };
    const CONE: PotentialSpec = PotentialSpec::TwoDCone {
        a: [0.0, 0.0],
        alpha: std::f64::consts::SQRT_2,
        beta: 2.0,
        eta: 0.5,
    };

    #[test]
    fn standard_1d_mass_16() {
        let g = build_grid(&ONE_D, 16.0, &GridPreset::Standard1d).unwrap();
        assert_eq!(g.node_count(), 79);
        let h = g.axes[0].h;
        assert!((h - 4.0 * std::f64::consts::PI / 80.0).abs() < 1e-15);
        assert!((h * 80.0 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn standard_2d_mass_100() {
        let g = build_grid(&CONE, 100.0, &GridPreset::Standard2d).unwrap();
        assert_eq!(g.shape(), vec![159, 159]);
        assert!((g.axes[0].h - 0.05).abs() < 1e-15);
        let fine = build_grid(&CONE, 100.0, &GridPreset::Fine2d).unwrap();
        assert_eq!(fine.shape(), vec![319, 319]);
    }

    #[test]
    fn explicit_small_grid() {
        let g = build_grid(&ONE_D, 1.0, &GridPreset::Explicit { h: 1.0, domain: vec![[0.0, 4.0]] }).unwrap();
        assert_eq!(g.node_count(), 3);
        let xs: Vec<f64> = (0..3).map(|i| g.coords(i)[0]).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn too_coarse_or_wrong_dimension() {
        assert!(build_grid(&ONE_D, 1.0, &GridPreset::Explicit { h: 1.0, domain: vec![[0.0, 3.0]] }).is_err());
        assert!(build_grid(&ONE_D, 16.0, &GridPreset::Standard2d).is_err());
        assert!(build_grid(&CONE, 16.0, &GridPreset::Standard1d).is_err());
        assert!(build_grid(&ONE_D, -1.0, &GridPreset::Standard1d).is_err());
    }

    #[test]
    fn row_major_coordinates() {
        let g = build_grid(&CONE, 1.0, &GridPreset::Explicit { h: 1.0, domain: vec![[0.0, 4.0], [0.0, 5.0]] }).unwrap();
        assert_eq!(g.shape(), vec![3, 4]);
        assert_eq!(g.coords(0), [1.0, 1.0]);
        assert_eq!(g.coords(1), [1.0, 2.0]);
        assert_eq!(g.coords(4), [2.0, 1.0]);
        assert_eq!(g.coords(11), [3.0, 4.0]);
    }
}
