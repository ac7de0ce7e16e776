//! One function per experiment kind. Each composes core operations, writes
//! its tables through an [`OutputSet`] and returns a one-row summary.

use std::collections::BTreeMap;

use nmd_core::dynamics::{
    bo_trajectory, ehrenfest_trajectory, hamiltonian_bo, landau_zener_closed_form, landau_zener_energy,
    landau_zener_ode, max_lyapunov, EhrenfestState, LzPreset, PhasePoint,
};
use nmd_core::eigensolve::{
    assemble_hamiltonian, build_grid, eigs_near, excited_probability, resonance_estimate, scalar_spectra,
    write_eigenvector, Branch, EigenPair, EigsOptions, Grid, GridPreset,
};
use nmd_core::estimators::{
    calibrated_poisson_rate, ergodicity_scan_ensemble, gbo_time_average, gmd_monte_carlo, hitting_time_histogram,
    multipath_sampling_error, pe_md, EhrenfestPropagator, EventMode, MultipathConfig, Observable, PeMdConfig, Window,
};
use nmd_core::rng::derive_seed;
use nmd_core::{stats, PotentialSpec};

use crate::config::*;
use crate::error::{CliError, Context};
use crate::output::{num, OutputSet, Table};

/// Stream indices under the master seed.
pub const SEED_MONTE_CARLO: u64 = 1;
pub const SEED_EVENTS: u64 = 2;
pub const SEED_EIGS: u64 = 3;

/// Ordered `(column, value)` pairs written as `summary.csv` and merged by
/// sweeps.
pub type Summary = Vec<(String, String)>;

pub(crate) struct RunContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a mut OutputSet,
    pub seeds: &'a mut BTreeMap<String, u64>,
}

impl RunContext<'_> {
    fn seed(&mut self, name: &str, index: u64) -> u64 {
        let s = derive_seed(self.cfg.seed, index);
        self.seeds.insert(name.to_string(), s);
        s
    }

    fn energy(&self) -> f64 {
        self.cfg.energy.expect("validated")
    }

    fn init(&self, init: &InitSpec) -> Result<PhasePoint, CliError> {
        init.phase_point(&self.cfg.potential, self.cfg.energy)
    }

    fn g_md(&mut self, g: Observable, n: usize, bbox: &Option<Vec<[f64; 2]>>) -> Result<nmd_core::estimators::McEstimate, CliError> {
        let seed = self.seed("monte_carlo", SEED_MONTE_CARLO);
        let bbox = self.cfg.sampling_box(bbox);
        let e = self.energy();
        gmd_monte_carlo(&self.cfg.potential, move |x| g.eval(x), e, n, seed, &bbox)
            .op("gmd_monte_carlo", || format!("E = {e}, n = {n}, box = {bbox:?}"))
    }
}

fn row(pairs: &[(&str, String)]) -> Summary {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub(crate) fn execute(ctx: &mut RunContext<'_>) -> Result<Summary, CliError> {
    let exp = ctx.cfg.experiment.clone();
    match &exp {
        Experiment::Spectrum(p) => spectrum(ctx, p),
        Experiment::PeEig(p) => pe_eig(ctx, p),
        Experiment::PeMd(p) => pe_md_run(ctx, p),
        Experiment::Observable(p) => observable(ctx, p),
        Experiment::Ergodicity(p) => ergodicity(ctx, p),
        Experiment::LandauZener(p) => landau_zener(ctx, p),
        Experiment::Ehrenfest(p) => ehrenfest(ctx, p),
        Experiment::Lyapunov(p) => lyapunov(ctx, p),
        Experiment::Multipath(p) => multipath(ctx, p),
        Experiment::HittingTimes(p) => hitting(ctx, p),
        Experiment::Sweep(_) => unreachable!("sweeps are dispatched by the runner"),
    }
}

fn solve(ctx: &mut RunContext<'_>, preset: &GridPreset, sigma: f64, k: usize, opts: &EigsOptions) -> Result<(Grid, Vec<EigenPair>), CliError> {
    let spec = &ctx.cfg.potential;
    let mass = ctx.cfg.mass;
    let grid = build_grid(spec, mass, preset).op("build_grid", || format!("M = {mass}, preset = {preset:?}"))?;
    let h = assemble_hamiltonian(&grid, spec, mass).op("assemble_hamiltonian", || format!("M = {mass}"))?;
    let mut opts = *opts;
    if opts.seed == 0 {
        opts.seed = ctx.seed("eigs", SEED_EIGS);
    } else {
        ctx.seeds.insert("eigs".into(), opts.seed);
    }
    let pairs = eigs_near(&h, sigma, k, &opts).op("eigs_near", || format!("σ = {sigma}, k = {k}, n = {}", h.size()))?;
    Ok((grid, pairs))
}

fn spectrum(ctx: &mut RunContext<'_>, p: &SpectrumParams) -> Result<Summary, CliError> {
    let (grid, pairs) = solve(ctx, &p.grid, p.sigma, p.k, &p.eigs)?;
    let spec = ctx.cfg.potential;
    let mut t = Table::new(&["index", "energy", "residual_norm", "p_e", "excluded_nodes", "flagged"]);
    for (i, pair) in pairs.iter().enumerate() {
        let ex = excited_probability(pair, &spec, &grid).op("excited_probability", || format!("pair {i}"))?;
        t.push([i.to_string(), num(pair.energy), num(pair.residual_norm), num(ex.p_e), ex.excluded_nodes.to_string(), ex.flagged.to_string()]);
        if p.dump_vectors {
            let rel = format!("vectors/pair-{i:04}.bin");
            let path = ctx.out.dir.join(&rel);
            std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| CliError::io(&path, e))?;
            write_eigenvector(&path, &grid, pair).map_err(|e| CliError::io(&path, e))?;
            ctx.out.register(&rel)?;
        }
    }
    ctx.out.write_table("spectrum.csv", &t)?;
    let max_res = pairs.iter().map(|p| p.residual_norm).fold(0.0, f64::max);
    Ok(row(&[
        ("unknowns", (grid.node_count() * 2).to_string()),
        ("pairs", pairs.len().to_string()),
        ("max_residual", num(max_res)),
    ]))
}

fn pe_eig(ctx: &mut RunContext<'_>, p: &PeEigParams) -> Result<Summary, CliError> {
    let (grid, pairs) = solve(ctx, &p.grid, p.sigma, p.k, &p.eigs)?;
    let spec = ctx.cfg.potential;
    let mass = ctx.cfg.mass;
    let p_e: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| excited_probability(pair, &spec, &grid).map(|x| x.p_e).op("excited_probability", || format!("pair {i}")))
        .collect::<Result<_, _>>()?;
    let p_hat: Option<Vec<f64>> = if p.resonance {
        let lo = pairs.iter().map(|p| p.energy).fold(f64::INFINITY, f64::min) - p.window_margin;
        let hi = pairs.iter().map(|p| p.energy).fold(f64::NEG_INFINITY, f64::max) + p.window_margin;
        let opts = EigsOptions { seed: ctx.seeds["eigs"], ..p.eigs };
        let minus = scalar_spectra(&grid, &spec, mass, Branch::Minus, (lo, hi), &opts)
            .op("scalar_spectra", || format!("λ− branch on [{lo}, {hi})"))?;
        let plus = scalar_spectra(&grid, &spec, mass, Branch::Plus, (lo, hi), &opts)
            .op("scalar_spectra", || format!("λ+ branch on [{lo}, {hi})"))?;
        let delta = match spec {
            PotentialSpec::OneD { delta, .. } | PotentialSpec::TwoDLine { delta, .. } => delta,
            PotentialSpec::TwoDCone { .. } => unreachable!("rejected by validation"),
        };
        let l0 = spec.lambda_minus_at([0.0, 0.0]);
        Some(
            pairs
                .iter()
                .map(|pair| {
                    resonance_estimate(pair.energy, &minus, &plus, delta, mass, l0, p.c)
                        .op("resonance_estimate", || format!("E = {}", pair.energy))
                })
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    let mut t = Table::new(&["energy", "p_e", "p_hat"]);
    for (i, pair) in pairs.iter().enumerate() {
        t.push([num(pair.energy), num(p_e[i]), opt(p_hat.as_ref().map(|v| v[i]))]);
    }
    ctx.out.write_table("pe_eig.csv", &t)?;
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(row(&[
        ("pairs", pairs.len().to_string()),
        ("min_p_e", num(min(&p_e))),
        ("min_p_hat", opt(p_hat.as_deref().map(min))),
        ("spearman", opt(p_hat.as_deref().and_then(|h| stats::spearman(&p_e, h)))),
    ]))
}

fn pe_md_run(ctx: &mut RunContext<'_>, p: &PeMdParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let e = ctx.energy();
    let init = ctx.init(&p.init)?;
    let events = match &p.events {
        EventsSpec::Plane { point, normal } => EventMode::Plane { point: *point, normal: *normal },
        EventsSpec::Poisson { rate, calibration_plane } => {
            let seed = ctx.seed("events", SEED_EVENTS);
            let rate = match (rate, calibration_plane) {
                (Some(r), _) => *r,
                (None, Some([point, normal])) => {
                    let traj = bo_trajectory(&spec, &init, p.dt_bo, p.t_end, 1)
                        .op("bo_trajectory", || format!("calibration run, dt = {}, T = {}", p.dt_bo, p.t_end))?;
                    calibrated_poisson_rate(&traj, *point, *normal).op("calibrated_poisson_rate", || format!("plane {point:?}, {normal:?}"))?
                }
                (None, None) => unreachable!("rejected by validation"),
            };
            EventMode::Poisson { rate, seed }
        }
    };
    let cfg = PeMdConfig {
        mass: ctx.cfg.mass,
        dt_bo: p.dt_bo,
        dt_ehrenfest: p.dt_ehrenfest,
        t_end: p.t_end,
        events,
        mode: p.mode,
        checkpoints: p.checkpoints.clone(),
    };
    let r = pe_md(&spec, e, &init, &cfg, &EhrenfestPropagator { mode: p.mode })
        .op("pe_md", || format!("E = {e}, M = {}, T = {}, events = {events:?}", ctx.cfg.mass, p.t_end))?;
    let mut t = Table::new(&["t", "p_hat"]);
    for (tc, v) in &r.checkpoints {
        t.push([num(*tc), num(*v)]);
    }
    t.push([num(p.t_end), num(r.pe_hat)]);
    ctx.out.write_table("pe_md.csv", &t)?;
    let mut s = Table::new(&["t_start", "t_end", "integral", "max_p_e"]);
    for seg in &r.segments {
        s.push([num(seg.t_start), num(seg.t_end), num(seg.integral), num(seg.max_p_e)]);
    }
    ctx.out.write_table("segments.csv", &s)?;
    let rate = match events {
        EventMode::Poisson { rate, .. } => num(rate),
        EventMode::Plane { .. } => String::new(),
    };
    Ok(row(&[("p_hat", num(r.pe_hat)), ("events", r.event_count.to_string()), ("poisson_rate", rate)]))
}

fn observable(ctx: &mut RunContext<'_>, p: &ObservableParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let g = p.g;
    let mc = ctx.g_md(g, p.n_samples, &p.bbox)?;
    let init = ctx.init(&p.init)?;
    let traj = bo_trajectory(&spec, &init, p.dt, p.t_end, 1).op("bo_trajectory", || format!("dt = {}, T = {}", p.dt, p.t_end))?;
    let full = gbo_time_average(&traj, |x| g.eval(x), Window::Full).op("gbo_time_average", || "full window".into())?;
    let tail = gbo_time_average(&traj, |x| g.eval(x), Window::TailHalf).op("gbo_time_average", || "tail half".into())?;
    let mut t = Table::new(&["quantity", "value", "standard_error"]);
    t.push(["g_md".to_string(), num(mc.value), num(mc.standard_error)]);
    t.push(["g_bo".to_string(), num(full), String::new()]);
    t.push(["g_bo_tail_half".to_string(), num(tail), String::new()]);
    ctx.out.write_table("observable.csv", &t)?;
    Ok(row(&[
        ("g_md", num(mc.value)),
        ("g_md_se", num(mc.standard_error)),
        ("accepted", mc.accepted.to_string()),
        ("boundary_hits", mc.boundary_hits.to_string()),
        ("g_bo", num(full)),
        ("g_bo_tail_half", num(tail)),
        ("energy_drift", num(traj.energy_drift())),
    ]))
}

fn ergodicity(ctx: &mut RunContext<'_>, p: &ErgodicityParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let g = p.g;
    let mc = ctx.g_md(g, p.n_samples, &p.bbox)?;
    let inits: Vec<PhasePoint> = p
        .angles
        .iter()
        .map(|a| ctx.init(&InitSpec { x0: p.x0.clone(), p0: None, angle: Some(*a) }))
        .collect::<Result<_, _>>()?;
    let scan = ergodicity_scan_ensemble(&spec, move |x| g.eval(x), mc.value, &inits, p.dt, &p.t_list)
        .op("ergodicity_scan", || format!("{} paths, dt = {}", inits.len(), p.dt))?;
    let mut t = Table::new(&["t", "error"]);
    for (tt, err) in &scan.rows {
        t.push([num(*tt), num(*err)]);
    }
    ctx.out.write_table("ergodicity.csv", &t)?;
    Ok(row(&[("g_md", num(mc.value)), ("g_md_se", num(mc.standard_error)), ("slope", opt(scan.slope))]))
}

fn landau_zener(ctx: &mut RunContext<'_>, p: &LandauZenerParams) -> Result<Summary, CliError> {
    let mass = ctx.cfg.mass;
    let preset = LzPreset::for_params(p.delta, mass, p.p0);
    let t0 = p.t0.unwrap_or(preset.t0);
    let dt = p.dt.unwrap_or(preset.dt);
    let closed = landau_zener_closed_form(p.delta, mass, p.p0).op("landau_zener_closed_form", || format!("δ = {}", p.delta))?;
    let ode = landau_zener_ode(p.delta, mass, p.p0, t0, dt)
        .op("landau_zener_ode", || format!("δ = {}, M = {mass}, P0 = {}, T0 = {t0}, dt = {dt}", p.delta, p.p0))?;
    let mut t = Table::new(&["delta", "mass", "p0", "t0", "dt", "p_lz", "adiabatic_excited", "survival_diabatic", "norm_error"]);
    t.push([p.delta, mass, p.p0, t0, dt, closed, ode.adiabatic_excited, ode.survival_diabatic, ode.norm_error].map(num));
    ctx.out.write_table("landau_zener.csv", &t)?;
    if p.trace {
        let mut tr = Table::new(&["t", "c1_sq", "c2_sq"]);
        for r in &ode.trace {
            tr.push(r.map(num));
        }
        ctx.out.write_table("lz_trace.csv", &tr)?;
    }
    Ok(row(&[
        ("p_lz", num(closed)),
        ("adiabatic_excited", num(ode.adiabatic_excited)),
        ("survival_diabatic", num(ode.survival_diabatic)),
        ("relative_error", num((ode.adiabatic_excited - closed).abs() / closed)),
    ]))
}

fn ehrenfest(ctx: &mut RunContext<'_>, p: &EhrenfestParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let mass = ctx.cfg.mass;
    let phase = ctx.init(&p.init)?;
    let state = match p.psi0 {
        ElectronicInit::Ground => EhrenfestState::ground(&spec, phase, mass, p.convention),
        ElectronicInit::Excited => EhrenfestState::excited(&spec, phase, mass, p.convention),
    }
    .op("ehrenfest_init", || format!("X0 = {:?}", phase.x))?;
    let traj = ehrenfest_trajectory(&spec, &state, p.dt, p.t_end, mass, p.mode, p.stride)
        .op("ehrenfest_trajectory", || format!("dt = {}, T = {}, M = {mass}", p.dt, p.t_end))?;
    let mut t = Table::new(&["t", "x1", "x2", "p1", "p2", "energy", "p_e", "norm"]);
    for s in &traj.samples {
        let el = s.electronic.expect("Ehrenfest samples carry the wave function");
        t.push([s.t, s.x[0], s.x[1], s.p[0], s.p[1], s.energy, el.p_e, el.norm].map(num));
    }
    ctx.out.write_table("trajectory.csv", &t)?;

    let p_e: Vec<f64> = traj.samples.iter().map(|s| s.electronic.unwrap().p_e).collect();
    let cut = traj.samples[0].t + (1.0 - p.tail_fraction) * (traj.samples.last().unwrap().t - traj.samples[0].t);
    let tail: Vec<f64> = traj.samples.iter().zip(&p_e).filter(|(s, _)| s.t >= cut).map(|(_, v)| *v).collect();
    let e_bo = hamiltonian_bo(&spec, &phase);
    let p_lz = match spec {
        PotentialSpec::OneD { delta, .. } | PotentialSpec::TwoDLine { delta, .. } => {
            landau_zener_energy(delta, mass, e_bo, spec.lambda_minus_at([0.0, 0.0])).ok()
        }
        PotentialSpec::TwoDCone { .. } => None,
    };
    Ok(row(&[
        ("p_e_tail", num(stats::mean(&tail))),
        ("p_e_max", num(p_e.iter().copied().fold(0.0, f64::max))),
        ("p_lz_energy", opt(p_lz)),
        ("energy_drift", num(traj.energy_drift())),
        ("final_norm", num(traj.samples.last().unwrap().electronic.unwrap().norm)),
    ]))
}

fn lyapunov(ctx: &mut RunContext<'_>, p: &LyapunovParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let init = ctx.init(&p.init)?;
    let l = max_lyapunov(&spec, &init, p.dt, p.t_end, p.renorm_every)
        .op("max_lyapunov", || format!("dt = {}, T = {}", p.dt, p.t_end))?;
    let mut t = Table::new(&["dt", "t_end", "renorm_every", "exponent"]);
    t.push([num(p.dt), num(p.t_end), p.renorm_every.to_string(), num(l)]);
    ctx.out.write_table("lyapunov.csv", &t)?;
    Ok(row(&[("exponent", num(l))]))
}

fn multipath(ctx: &mut RunContext<'_>, p: &MultipathParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let g = p.g;
    let (g_ref, se) = match p.g_ref {
        Some(v) => (v, None),
        None => {
            let mc = ctx.g_md(g, p.n_samples, &p.bbox)?;
            (mc.value, Some(mc.standard_error))
        }
    };
    let x0 = spec.point(&p.x0).map_err(|e| CliError::validation(format!("x0: {e}")))?;
    let cfg = MultipathConfig {
        n_list: p.n_list.clone(),
        delta_v: p.delta_v,
        base_angle: p.base_angle,
        dt: p.dt,
        t_end: p.t_end,
        pool: p.pool,
        x0,
    };
    let e = ctx.energy();
    let rows = multipath_sampling_error(&spec, move |x| g.eval(x), e, &cfg, g_ref)
        .op("multipath_sampling_error", || format!("Δv = {}, pool = {}", p.delta_v, p.pool))?;
    let mut t = Table::new(&["n", "error"]);
    for (n, err) in &rows {
        t.push([n.to_string(), num(*err)]);
    }
    ctx.out.write_table("multipath.csv", &t)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|(n, e)| (*n as f64, *e)).collect();
    Ok(row(&[("g_ref", num(g_ref)), ("g_ref_se", opt(se)), ("slope", opt(stats::loglog_slope(&pts)))]))
}

fn hitting(ctx: &mut RunContext<'_>, p: &HittingParams) -> Result<Summary, CliError> {
    let spec = ctx.cfg.potential;
    let init = ctx.init(&p.init)?;
    let traj = bo_trajectory(&spec, &init, p.dt, p.t_end, 1).op("bo_trajectory", || format!("dt = {}, T = {}", p.dt, p.t_end))?;
    let h = hitting_time_histogram(&traj, p.point, p.normal, p.n_bins)
        .op("hitting_time_histogram", || format!("plane {:?}, {:?}", p.point, p.normal))?;
    let mut t = Table::new(&["bin_lo", "bin_hi", "count"]);
    for (i, c) in h.counts.iter().enumerate() {
        t.push([num(h.bin_edges[i]), num(h.bin_edges[i + 1]), c.to_string()]);
    }
    ctx.out.write_table("hitting_times.csv", &t)?;
    Ok(row(&[
        ("crossings", (h.gaps.len() + 1).to_string()),
        ("rate", num(h.rate)),
        ("ks_distance", num(h.ks_distance)),
        ("ks_critical", num(h.ks_critical)),
    ]))
}
