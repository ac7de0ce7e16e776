//! Experiment configuration files.
//!
//! A config is a TOML document with a master `seed`, a `[potential]` table
//! (the potential family and its parameters), the global `mass` and
//! `energy`, and an `[experiment]` table whose `kind` selects the
//! computation. Everything is validated before any work starts.

use std::path::{Path, PathBuf};

use nmd_core::dynamics::{EhrenfestMode, NormConvention, PhasePoint};
use nmd_core::eigensolve::{EigsOptions, GridPreset};
use nmd_core::estimators::Observable;
use nmd_core::PotentialSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Output directory, overridable on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Mass ratio `M`.
    pub mass: f64,
    /// Total energy `E`, needed by every kind that starts on an energy shell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub potential: PotentialSpec,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum(SpectrumParams),
    PeEig(PeEigParams),
    PeMd(PeMdParams),
    Observable(ObservableParams),
    Ergodicity(ErgodicityParams),
    LandauZener(LandauZenerParams),
    Ehrenfest(EhrenfestParams),
    Lyapunov(LyapunovParams),
    Multipath(MultipathParams),
    HittingTimes(HittingParams),
    Sweep(SweepParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Spectrum(_) => "spectrum",
            Experiment::PeEig(_) => "pe-eig",
            Experiment::PeMd(_) => "pe-md",
            Experiment::Observable(_) => "observable",
            Experiment::Ergodicity(_) => "ergodicity",
            Experiment::LandauZener(_) => "landau-zener",
            Experiment::Ehrenfest(_) => "ehrenfest",
            Experiment::Lyapunov(_) => "lyapunov",
            Experiment::Multipath(_) => "multipath",
            Experiment::HittingTimes(_) => "hitting-times",
            Experiment::Sweep(_) => "sweep",
        }
    }
}

/// Initial phase point: either an explicit momentum or a direction on the
/// energy shell `|P| = √(2(E − λ−(x0)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    /// Direction of the initial momentum in radians; in 1D only the sign of
    /// its cosine matters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl InitSpec {
    pub fn phase_point(&self, spec: &PotentialSpec, energy: Option<f64>) -> Result<PhasePoint, CliError> {
        let x = spec.point(&self.x0).map_err(|e| CliError::validation(format!("init.x0: {e}")))?;
        match (&self.p0, self.angle) {
            (Some(p), None) => {
                let p = spec.point(p).map_err(|e| CliError::validation(format!("init.p0: {e}")))?;
                Ok(PhasePoint::new(x, p))
            }
            (None, Some(angle)) => {
                let e = energy.ok_or_else(|| CliError::validation("init.angle needs a top-level energy"))?;
                PhasePoint::on_energy_shell(spec, e, x, angle).map_err(|e| CliError::validation(format!("init: {e}")))
            }
            _ => Err(CliError::validation("init needs exactly one of p0 or angle")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub grid: GridPreset,
    /// Shift: pairs closest to `sigma` are returned.
    pub sigma: f64,
    pub k: usize,
    #[serde(default)]
    pub eigs: EigsOptions,
    /// Also write each eigenvector as a binary dump.
    #[serde(default)]
    pub dump_vectors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeEigParams {
    pub grid: GridPreset,
    pub sigma: f64,
    pub k: usize,
    #[serde(default)]
    pub eigs: EigsOptions,
    /// Add the resonance estimate column (avoided-crossing potentials only).
    #[serde(default)]
    pub resonance: bool,
    /// Constant `C` of the resonance estimate.
    #[serde(default = "one")]
    pub c: f64,
    /// Half-width added around the returned energies when collecting the
    /// scalar spectra.
    #[serde(default = "default_margin")]
    pub window_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EventsSpec {
    Plane { point: [f64; 2], normal: [f64; 2] },
    /// Poisson initialization times; without `rate` the mean crossing rate
    /// of `calibration_plane` along the same path is used.
    Poisson {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calibration_plane: Option<[[f64; 2]; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeMdParams {
    pub init: InitSpec,
    pub dt_bo: f64,
    pub dt_ehrenfest: f64,
    pub t_end: f64,
    pub events: EventsSpec,
    #[serde(default)]
    pub mode: EhrenfestMode,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableParams {
    pub g: Observable,
    pub init: InitSpec,
    pub dt: f64,
    pub t_end: f64,
    pub n_samples: usize,
    /// Rejection-sampling box; defaults to the eigenproblem domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityParams {
    pub g: Observable,
    pub x0: Vec<f64>,
    /// One path per angle; the error at each `T` is the RMS over paths.
    pub angles: Vec<f64>,
    pub dt: f64,
    pub t_list: Vec<f64>,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauZenerParams {
    pub delta: f64,
    pub p0: f64,
    /// Half-width of the sweep; defaults to the documented preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Also write the `(t, |c₁|², |c₂|²)` trace.
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectronicInit {
    #[default]
    Ground,
    Excited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhrenfestParams {
    pub init: InitSpec,
    #[serde(default)]
    pub psi0: ElectronicInit,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default)]
    pub mode: EhrenfestMode,
    #[serde(default)]
    pub convention: NormConvention,
    /// Fraction of the run, counted from the end, used for the tail average
    /// of `p_E`.
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    pub init: InitSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one_usize")]
    pub renorm_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathParams {
    pub g: Observable,
    pub n_list: Vec<usize>,
    pub delta_v: f64,
    #[serde(default = "default_base_angle")]
    pub base_angle: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub pool: usize,
    #[serde(default = "origin")]
    pub x0: Vec<f64>,
    /// Reference value; estimated by Monte Carlo with `n_samples` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_ref: Option<f64>,
    #[serde(default = "default_mc")]
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingParams {
    pub init: InitSpec,
    pub dt: f64,
    pub t_end: f64,
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Dotted path of a leaf field, e.g. `potential.a.0` or `experiment.dt`
    /// (relative to the config with `experiment` replaced by `base`).
    pub axis: String,
    pub values: Vec<toml::Value>,
    #[serde(default = "one_usize")]
    pub parallelism: usize,
    pub base: Box<Experiment>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_margin() -> f64 {
    1.0
}
fn default_tail() -> f64 {
    0.2
}
fn default_base_angle() -> f64 {
    1.2
}
fn default_mc() -> usize {
    1_000_000
}
fn origin() -> Vec<f64> {
    vec![0.0, 0.0]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Rejection-sampling box: the explicit one, or the eigenproblem domain.
    pub fn sampling_box(&self, bbox: &Option<Vec<[f64; 2]>>) -> Vec<[f64; 2]> {
        if let Some(b) = bbox {
            return b.clone();
        }
        match self.potential.dim() {
            1 => vec![[-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI]],
            _ => vec![[-4.0, 4.0]; 2],
        }
    }

    /// Checks every numeric field before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::validation(msg));
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must fit a TOML integer (at most {})", i64::MAX));
        }
        self.potential.validate().map_err(|e| CliError::validation(format!("potential: {e}")))?;
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive and finite, got {}", self.mass));
        }
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return bad("energy must be finite".into());
            }
        }
        let dim = self.potential.dim();
        let check_box = |b: &Option<Vec<[f64; 2]>>| -> Result<(), CliError> {
            if let Some(b) = b {
                if b.len() != dim || b.iter().any(|r| !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite()) {
                    return Err(CliError::validation(format!("bbox needs {dim} finite ranges [lo, hi] with lo < hi")));
                }
            }
            Ok(())
        };
        let need_energy = || {
            self.energy.ok_or_else(|| CliError::validation(format!("kind {} needs a top-level energy", self.experiment.kind())))
        };
        match &self.experiment {
            Experiment::Spectrum(p) => {
                positive_count("k", p.k)?;
                finite("sigma", p.sigma)?;
                eigs(&p.eigs)?;
                grid(&p.grid, dim)?;
            }
            Experiment::PeEig(p) => {
                positive_count("k", p.k)?;
                finite("sigma", p.sigma)?;
                eigs(&p.eigs)?;
                grid(&p.grid, dim)?;
                positive("c", p.c)?;
                positive("window_margin", p.window_margin)?;
                if p.resonance && matches!(self.potential, PotentialSpec::TwoDCone { .. }) {
                    return bad("the resonance estimate needs an avoided crossing (one-d or two-d-line)".into());
                }
            }
            Experiment::PeMd(p) => {
                let e = need_energy()?;
                positive("dt_bo", p.dt_bo)?;
                positive("dt_ehrenfest", p.dt_ehrenfest)?;
                positive("t_end", p.t_end)?;
                let init = p.init.phase_point(&self.potential, Some(e))?;
                allowed(&self.potential, e, &init)?;
                match &p.events {
                    EventsSpec::Plane { normal, point } => plane(*point, *normal)?,
                    EventsSpec::Poisson { rate, calibration_plane } => match (rate, calibration_plane) {
                        (Some(r), None) => positive("events.rate", *r)?,
                        (None, Some([point, normal])) => plane(*point, *normal)?,
                        _ => return bad("poisson events need exactly one of rate or calibration_plane".into()),
                    },
                }
                for c in &p.checkpoints {
                    if !(*c > 0.0 && *c <= p.t_end) {
                        return bad(format!("checkpoint {c} outside (0, t_end]"));
                    }
                }
            }
            Experiment::Observable(p) => {
                let e = need_energy()?;
                positive("dt", p.dt)?;
                positive("t_end", p.t_end)?;
                positive_count("n_samples", p.n_samples)?;
                check_box(&p.bbox)?;
                p.init.phase_point(&self.potential, Some(e))?;
            }
            Experiment::Ergodicity(p) => {
                let e = need_energy()?;
                positive("dt", p.dt)?;
                positive_count("n_samples", p.n_samples)?;
                check_box(&p.bbox)?;
                if p.angles.is_empty() || p.t_list.is_empty() {
                    return bad("angles and t_list must be nonempty".into());
                }
                for t in &p.t_list {
                    positive("t_list entry", *t)?;
                }
                for a in &p.angles {
                    InitSpec { x0: p.x0.clone(), p0: None, angle: Some(*a) }.phase_point(&self.potential, Some(e))?;
                }
            }
            Experiment::LandauZener(p) => {
                if !(p.delta >= 0.0 && p.delta.is_finite()) {
                    return bad("delta must be >= 0".into());
                }
                positive("p0", p.p0)?;
                if let Some(t) = p.t0 {
                    positive("t0", t)?;
                }
                if let Some(t) = p.dt {
                    positive("dt", t)?;
                }
            }
            Experiment::Ehrenfest(p) => {
                positive("dt", p.dt)?;
                positive("t_end", p.t_end)?;
                positive_count("stride", p.stride)?;
                if !(p.tail_fraction > 0.0 && p.tail_fraction <= 1.0) {
                    return bad("tail_fraction must lie in (0, 1]".into());
                }
                p.init.phase_point(&self.potential, self.energy)?;
            }
            Experiment::Lyapunov(p) => {
                positive("dt", p.dt)?;
                positive("t_end", p.t_end)?;
                positive_count("renorm_every", p.renorm_every)?;
                p.init.phase_point(&self.potential, self.energy)?;
            }
            Experiment::Multipath(p) => {
                let e = need_energy()?;
                positive("dt", p.dt)?;
                positive("t_end", p.t_end)?;
                if p.n_list.is_empty() || p.n_list.contains(&0) {
                    return bad("n_list must be nonempty with entries >= 1".into());
                }
                let n_max = *p.n_list.iter().max().unwrap();
                if p.pool != 0 && p.pool < n_max {
                    return bad(format!("pool {} is smaller than the largest N {n_max}", p.pool));
                }
                finite("delta_v", p.delta_v)?;
                positive_count("n_samples", p.n_samples)?;
                check_box(&p.bbox)?;
                InitSpec { x0: p.x0.clone(), p0: None, angle: Some(p.base_angle) }
                    .phase_point(&self.potential, Some(e))?;
            }
            Experiment::HittingTimes(p) => {
                positive("dt", p.dt)?;
                positive("t_end", p.t_end)?;
                positive_count("n_bins", p.n_bins)?;
                plane(p.point, p.normal)?;
                p.init.phase_point(&self.potential, self.energy)?;
            }
            Experiment::Sweep(s) => {
                if s.values.is_empty() {
                    return bad("sweep needs at least one value".into());
                }
                positive_count("parallelism", s.parallelism)?;
                if matches!(*s.base, Experiment::Sweep(_)) {
                    return bad("nested sweeps are not supported".into());
                }
                for (i, _) in s.values.iter().enumerate() {
                    crate::sweep::child_config(self, &s.axis, &s.values, i)?.validate()?;
                }
            }
        }
        Ok(())
    }
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{name} must be finite")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{name} must be positive and finite, got {v}")))
    }
}

fn positive_count(name: &str, v: usize) -> Result<(), CliError> {
    if v > 0 {
        Ok(())
    } else {
        Err(CliError::validation(format!("{name} must be at least 1")))
    }
}

fn plane(point: [f64; 2], normal: [f64; 2]) -> Result<(), CliError> {
    if point.iter().chain(&normal).any(|v| !v.is_finite()) || normal == [0.0, 0.0] {
        return Err(CliError::validation("plane needs a finite point and a nonzero normal"));
    }
    Ok(())
}

fn eigs(o: &EigsOptions) -> Result<(), CliError> {
    positive("eigs.tol", o.tol)
}

fn grid(g: &GridPreset, dim: usize) -> Result<(), CliError> {
    match g {
        GridPreset::Standard1d if dim != 1 => Err(CliError::validation("grid preset standard1d needs a one-d potential")),
        GridPreset::Standard2d | GridPreset::Fine2d if dim != 2 => {
            Err(CliError::validation("2D grid presets need a two-dimensional potential"))
        }
        GridPreset::Explicit { h, domain } => {
            positive("grid.h", *h)?;
            if domain.len() != dim {
                return Err(CliError::validation(format!("grid.domain needs {dim} ranges")));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn allowed(spec: &PotentialSpec, e: f64, init: &PhasePoint) -> Result<(), CliError> {
    if spec.lambda_minus_at(init.x) > e {
        return Err(CliError::validation(format!("init.x0 = {:?} is not classically allowed at E = {e}", init.x)));
    }
    Ok(())
}
