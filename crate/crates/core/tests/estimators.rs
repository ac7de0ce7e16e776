use std::f64::consts::PI;

use nmd_core::dynamics::{
    bo_trajectory, EhrenfestState, Integrator, NormConvention, PhasePoint, Sample, Trajectory,
};
use nmd_core::estimators::{
    calibrated_poisson_rate, ergodicity_scan, gap_statistics, gbo_time_average, generate_events, gmd_monte_carlo,
    hitting_time_histogram, multipath_sampling_error, pe_md, EhrenfestPropagator, EventMode, MultipathConfig,
    PeMdConfig, SegmentPropagator, Window,
};
use nmd_core::{rng, NmdError, PotentialSpec, Result};
use rand_distr::{Distribution, Exp};

fn harmonic() -> PotentialSpec {
    PotentialSpec::TwoDLine { delta: 0.0, alpha: 1.0, beta: 0.0, eta: 0.0 }
}

fn line_trajectory(dt: f64, t_end: f64) -> Trajectory {
    let n = (t_end / dt).round() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            Sample { t, x: [t - 1.0, 0.0], p: [1.0, 0.0], energy: 0.5, electronic: None }
        })
        .collect();
    Trajectory { dim: 1, dt, stride: 1, integrator: Integrator::Verlet, samples }
}

const X_PLANE: EventMode = EventMode::Plane { point: [0.0, 0.0], normal: [1.0, 0.0] };

#[test]
fn straight_line_crosses_once() {
    let events = generate_events(&line_trajectory(0.03, 3.0), X_PLANE).unwrap();
    assert_eq!(events.count(), 1);
    assert_eq!(events.records[0].t, 0.0);
    assert!((events.records[1].t - 1.0).abs() < 1e-12);
    assert!(events.records[1].x[0].abs() < 1e-12);
}

#[test]
fn circular_orbit_crosses_twice_per_period() {
    let traj = bo_trajectory(&harmonic(), &PhasePoint::new([1.0, 0.0], [0.0, 1.0]), 1e-3, 10.0 * PI, 1).unwrap();
    let events = generate_events(&traj, X_PLANE).unwrap();
    assert_eq!(events.count(), 10);
    for (k, t) in events.event_times().iter().enumerate() {
        assert!((t - (k as f64 + 0.5) * PI).abs() < 1e-5, "{k}: {t}");
    }
    let rate = calibrated_poisson_rate(&traj, [0.0; 2], [1.0, 0.0]).unwrap();
    assert!((rate - 1.0 / PI).abs() < 1e-3);
}

#[test]
fn no_crossing_is_an_empty_events_error() {
    let err = generate_events(&line_trajectory(0.1, 0.5), X_PLANE).unwrap_err();
    assert!(matches!(err, NmdError::EmptyEvents { .. }));
    let bad = EventMode::Plane { point: [0.0; 2], normal: [0.0; 2] };
    assert!(generate_events(&line_trajectory(0.1, 3.0), bad).is_err());
}

#[test]
fn poisson_event_counts_have_mean_rate_times_horizon() {
    let (rate, t_end) = (2.0, 50.0);
    let traj = line_trajectory(1e-3, t_end);
    let seeds = 200;
    let total: usize = (0..seeds)
        .map(|seed| generate_events(&traj, EventMode::Poisson { rate, seed }).unwrap().count())
        .sum();
    let mean = total as f64 / seeds as f64;
    let expected = rate * t_end;
    assert!((mean - expected).abs() <= 3.0 * (expected / seeds as f64).sqrt(), "{mean}");
    let a = generate_events(&traj, EventMode::Poisson { rate, seed: 3 }).unwrap();
    let b = generate_events(&traj, EventMode::Poisson { rate, seed: 3 }).unwrap();
    assert_eq!(a, b);
    assert!(a.records.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn exponential_gaps_fit_their_rate() {
    let exp = Exp::new(2.0).unwrap();
    let mut stream = rng::stream(11, 0);
    let mut t = 0.0;
    let times: Vec<f64> = (0..8000)
        .map(|_| {
            t += exp.sample(&mut stream);
            t
        })
        .collect();
    let stats = gap_statistics(&times, 30).unwrap();
    assert!((stats.rate / 2.0 - 1.0).abs() < 0.05, "{}", stats.rate);
    assert!(stats.ks_distance < stats.ks_critical, "{} vs {}", stats.ks_distance, stats.ks_critical);
    assert_eq!(stats.counts.iter().sum::<usize>(), times.len() - 1);
}

#[test]
fn periodic_gaps_are_far_from_exponential() {
    let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.7).collect();
    let stats = gap_statistics(&times, 5).unwrap();
    assert!(stats.ks_distance > 0.6, "{}", stats.ks_distance);
    assert!(matches!(gap_statistics(&times[..10], 5), Err(NmdError::InsufficientData { needed: 20, got: 10 })));
    let traj = bo_trajectory(&harmonic(), &PhasePoint::new([1.0, 0.0], [0.0, 1.0]), 1e-3, 6.0 * PI, 10).unwrap();
    assert!(matches!(
        hitting_time_histogram(&traj, [0.0; 2], [1.0, 0.0], 4),
        Err(NmdError::InsufficientData { .. })
    ));
}

#[test]
fn monte_carlo_basics() {
    let spec = harmonic();
    let bbox = [[-3.0, 3.0], [-3.0, 3.0]];
    let one = gmd_monte_carlo(&spec, |_| 1.0, 1.5, 100_000, 5, &bbox).unwrap();
    assert_eq!(one.value, 1.0);
    assert_eq!(one.standard_error, 0.0);
    // mean of |X|² over the disc of radius √(2E) is E
    let r2 = gmd_monte_carlo(&spec, |x| x[0] * x[0] + x[1] * x[1], 1.5, 400_000, 5, &bbox).unwrap();
    assert!((r2.value - 1.5).abs() < 4.0 * r2.standard_error, "{r2:?}");
    assert_eq!(r2.boundary_hits, 0);
    // a box that clips the disc reports boundary hits
    let clipped = gmd_monte_carlo(&spec, |_| 1.0, 1.5, 100_000, 5, &[[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
    assert!(clipped.boundary_hits > 0);
    assert!(gmd_monte_carlo(&spec, |_| 1.0, -1.0, 1000, 5, &bbox).is_err());
}

#[test]
fn monte_carlo_is_thread_count_invariant() {
    let spec = PotentialSpec::TwoDCone { a: [0.0, 0.0], alpha: 2f64.sqrt(), beta: 2.0, eta: 0.0 };
    let bbox = [[-4.0, 4.0], [-4.0, 4.0]];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            gmd_monte_carlo(&spec, |x| (x[0] * x[1]).sin(), 1.5, 300_000, 9, &bbox).unwrap()
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a, b);
}

#[test]
fn monte_carlo_error_scales_as_inverse_square_root() {
    let spec = harmonic();
    let bbox = [[-3.0, 3.0], [-3.0, 3.0]];
    let g = |x: [f64; 2]| x[0];
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let small = gmd_monte_carlo(&spec, g, 1.5, 50_000, seed, &bbox).unwrap();
        let big = gmd_monte_carlo(&spec, g, 1.5, 200_000, seed + 100, &bbox).unwrap();
        ratios.push(small.standard_error / big.standard_error);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean / 2.0 - 1.0).abs() < 0.2, "{ratios:?}");
}

#[test]
fn time_averages() {
    let spec = harmonic();
    let e = 0.8f64;
    let a = (2.0 * e).sqrt();
    let traj = bo_trajectory(&spec, &PhasePoint::new([a, 0.0], [0.0, 0.0]), 1e-3, 20.0 * PI, 1).unwrap();
    assert_eq!(gbo_time_average(&traj, |_| 1.0, Window::Full).unwrap(), 1.0);
    assert_eq!(gbo_time_average(&traj, |_| 1.0, Window::TailHalf).unwrap(), 1.0);
    assert!((gbo_time_average(&traj, |_| 2.5, Window::Full).unwrap() - 2.5).abs() < 1e-12);
    let x2 = gbo_time_average(&traj, |x| x[0] * x[0], Window::Full).unwrap();
    assert!((x2 - e).abs() < 1e-3, "{x2}");
    let tail = gbo_time_average(&traj, |x| x[0] * x[0], Window::TailHalf).unwrap();
    assert!((tail - e).abs() < 2e-3, "{tail}");
}

#[test]
fn integrable_ergodicity_scan_decays_like_inverse_time() {
    let spec = harmonic();
    let init = PhasePoint::new([1.0, 0.0], [0.0, 0.0]);
    let t_list: Vec<f64> = (0..6).map(|k| 10.0 * 2f64.powi(k) + 0.3).collect();
    let scan = ergodicity_scan(&spec, |x| x[0] * x[0], 0.5, &init, 1e-3, &t_list).unwrap();
    assert!(scan.slope.unwrap() <= -0.9, "{:?}", scan);
    let single = ergodicity_scan(&spec, |x| x[0] * x[0], 0.5, &init, 1e-3, &t_list[..1]).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert!(single.slope.is_none());
}

#[test]
fn single_path_multipath_is_the_tail_average() {
    let spec = PotentialSpec::TwoDCone { a: [0.0, 0.0], alpha: 2f64.sqrt(), beta: 2.0, eta: 0.0 };
    let g = |x: [f64; 2]| (x[0] * x[1]).sin();
    let cfg = MultipathConfig {
        n_list: vec![1],
        delta_v: 1e-6,
        base_angle: 1.2,
        dt: 0.01,
        t_end: 20.0,
        pool: 1,
        x0: [0.0, 0.0],
    };
    let rows = multipath_sampling_error(&spec, g, 1.5, &cfg, -0.4388).unwrap();
    let init = PhasePoint::on_energy_shell(&spec, 1.5, [0.0, 0.0], 1.2 + 1e-6).unwrap();
    let traj = bo_trajectory(&spec, &init, 0.01, 20.0, 1).unwrap();
    let direct = gbo_time_average(&traj, g, Window::TailHalf).unwrap() + 0.4388;
    assert_eq!(rows.len(), 1);
    assert!((rows[0].1 - direct.abs()).abs() < 1e-12, "{} vs {direct}", rows[0].1);
}

fn pe_cfg(events: EventMode) -> PeMdConfig {
    PeMdConfig { mass: 200.0, dt_bo: 0.01, dt_ehrenfest: 0.002, t_end: 20.0, events, mode: Default::default(), checkpoints: vec![] }
}

#[test]
fn pe_md_vanishes_without_coupling() {
    let spec = PotentialSpec::TwoDLine { delta: 0.3, alpha: 2f64.sqrt(), beta: 2.0, eta: 0.0 };
    let init = PhasePoint::on_energy_shell(&spec, 1.5, [0.0, 0.0], 1.2).unwrap();
    let r = pe_md(&spec, 1.5, &init, &pe_cfg(X_PLANE), &EhrenfestPropagator::default()).unwrap();
    assert!(r.pe_hat <= 1e-10, "{}", r.pe_hat);
    assert!(r.event_count > 0);
}

/// Ignores the dynamics and holds ψ at the equal mixture of the adiabatic
/// states.
struct EqualMixture;

impl SegmentPropagator for EqualMixture {
    fn step(&self, spec: &PotentialSpec, state: &EhrenfestState, dt: f64, mass: f64) -> Result<EhrenfestState> {
        let mut phase = state.phase;
        phase.t += dt;
        let f = spec.frame_at(phase.x, None)?;
        let s = 0.5f64.sqrt();
        let dir = [s * (f.psi_minus[0] + f.psi_plus[0]), s * (f.psi_minus[1] + f.psi_plus[1])];
        Ok(EhrenfestState::with_psi(phase, dir, mass, NormConvention::Unit))
    }
}

#[test]
fn pe_md_integrates_a_constant_amplitude() {
    let spec = PotentialSpec::TwoDCone { a: [2.0, 0.0], alpha: 2f64.sqrt(), beta: 2.0, eta: 0.5 };
    let init = PhasePoint::on_energy_shell(&spec, 1.5, [0.0, 0.0], 1.2).unwrap();
    let r = pe_md(&spec, 1.5, &init, &pe_cfg(X_PLANE), &EqualMixture).unwrap();
    // each segment starts in the ground state, so the first step of each
    // segment ramps from 0 to 1/√2
    let ramp: f64 = r.segments.iter().map(|s| (s.t_end - s.t_start).min(0.002) * 0.5f64.sqrt() / 2.0).sum();
    let expected = 0.5f64.sqrt() - ramp / 20.0;
    assert!((r.pe_hat - expected).abs() < 1e-6, "{} vs {expected}", r.pe_hat);
}

#[test]
fn pe_md_is_deterministic_and_checkpoints_are_consistent() {
    let spec = PotentialSpec::TwoDCone { a: [1.0, 0.0], alpha: 2f64.sqrt(), beta: 2.0, eta: 0.5 };
    let init = PhasePoint::on_energy_shell(&spec, 1.5, [0.0, 0.0], 1.2).unwrap();
    let mut cfg = pe_cfg(EventMode::Poisson { rate: 0.5, seed: 4 });
    cfg.checkpoints = vec![5.0, 10.0, 20.0];
    let a = pe_md(&spec, 1.5, &init, &cfg, &EhrenfestPropagator::default()).unwrap();
    let b = pe_md(&spec, 1.5, &init, &cfg, &EhrenfestPropagator::default()).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.pe_hat));
    assert!(a.pe_hat > 0.0);
    assert_eq!(a.checkpoints.len(), 3);
    assert!((a.checkpoints[2].1 - a.pe_hat).abs() < 1e-14);
    assert!(a.checkpoints.iter().all(|c| (0.0..=1.0).contains(&c.1)));
    let mut short = cfg.clone();
    short.checkpoints = vec![30.0];
    assert!(pe_md(&spec, 1.5, &init, &short, &EhrenfestPropagator::default()).is_err());
}
