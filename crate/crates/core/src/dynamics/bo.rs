use super::{step_count, Integrator, PhasePoint, Sample, Trajectory};
use crate::error::Result;
use crate::model::PotentialSpec;

/// `H₀ = |P|²/2 + λ−(X)`.
pub fn hamiltonian_bo(spec: &PotentialSpec, phase: &PhasePoint) -> f64 {
    phase.kinetic() + spec.lambda_minus_at(phase.x)
}

/// Velocity Verlet on the ground surface, caching `∇λ−` between steps.
#[derive(Debug, Clone)]
pub struct BoStepper<'a> {
    spec: &'a PotentialSpec,
    pub state: PhasePoint,
    grad: [f64; 2],
}

impl<'a> BoStepper<'a> {
    pub fn new(spec: &'a PotentialSpec, init: PhasePoint) -> Result<Self> {
        init.check(spec)?;
        let grad = spec.grad_lambda_minus_at(init.x)?;
        Ok(BoStepper { spec, state: init, grad })
    }

    /// Current `∇λ−(X)`.
    pub fn grad(&self) -> [f64; 2] {
        self.grad
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let s = &mut self.state;
        let half = 0.5 * dt;
        let p_half = [s.p[0] - half * self.grad[0], s.p[1] - half * self.grad[1]];
        let x = [s.x[0] + dt * p_half[0], s.x[1] + dt * p_half[1]];
        let g = self.spec.grad_lambda_minus_at(x)?;
        s.x = x;
        s.p = [p_half[0] - half * g[0], p_half[1] - half * g[1]];
        s.t += dt;
        self.grad = g;
        Ok(())
    }
}

/// One velocity-Verlet step with force `−∇λ−`.
pub fn bo_step(spec: &PotentialSpec, state: &PhasePoint, dt: f64) -> Result<PhasePoint> {
    let mut stepper = BoStepper::new(spec, *state)?;
    stepper.step(dt)?;
    Ok(stepper.state)
}

pub fn bo_trajectory(spec: &PotentialSpec, init: &PhasePoint, dt: f64, t_end: f64, stride: usize) -> Result<Trajectory> {
    let steps = step_count(dt, t_end, stride)?;
    let mut stepper = BoStepper::new(spec, *init)?;
    let mut samples = Vec::with_capacity(steps / stride + 1);
    let record = |s: &PhasePoint| Sample {
        t: s.t,
        x: s.x,
        p: s.p,
        energy: hamiltonian_bo(spec, s),
        electronic: None,
    };
    samples.push(record(&stepper.state));
    for k in 1..=steps {
        stepper.step(dt)?;
        stepper.state.t = init.t + k as f64 * dt;
        if k % stride == 0 {
            samples.push(record(&stepper.state));
        }
    }
    Ok(Trajectory { dim: spec.dim(), dt, stride, integrator: Integrator::Verlet, samples })
}
