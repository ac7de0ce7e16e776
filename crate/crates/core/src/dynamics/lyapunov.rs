use super::bo::BoStepper;
use super::PhasePoint;
use crate::error::{NmdError, Result};
use crate::model::PotentialSpec;

/// Largest Lyapunov exponent of the Born–Oppenheimer flow by Benettin's
/// method: one tangent vector is carried along with the linearized Verlet
/// map and renormalized every `renorm_every` steps.
pub fn max_lyapunov(spec: &PotentialSpec, init: &PhasePoint, dt: f64, t_end: f64, renorm_every: usize) -> Result<f64> {
    if renorm_every == 0 {
        return Err(NmdError::invalid("renormalization interval must be at least 1"));
    }
    let steps = super::step_count(dt, t_end, 1)?;
    if steps == 0 {
        return Err(NmdError::invalid("horizon shorter than one step"));
    }
    let dim = spec.dim();
    let mut stepper = BoStepper::new(spec, *init)?;
    // tangent (δX, δP), equal weight on every active direction
    let mut dx = [0.0; 2];
    let mut dp = [0.0; 2];
    let c = 1.0 / (2.0 * dim as f64).sqrt();
    for i in 0..dim {
        dx[i] = c;
        dp[i] = c;
    }
    let mut hess = spec.hessian_lambda_minus_at(init.x)?;
    let half = 0.5 * dt;
    let mut log_sum = 0.0;
    for k in 1..=steps {
        let dp_half = [
            dp[0] - half * (hess[0][0] * dx[0] + hess[0][1] * dx[1]),
            dp[1] - half * (hess[1][0] * dx[0] + hess[1][1] * dx[1]),
        ];
        stepper.step(dt)?;
        dx = [dx[0] + dt * dp_half[0], dx[1] + dt * dp_half[1]];
        hess = spec.hessian_lambda_minus_at(stepper.state.x)?;
        dp = [
            dp_half[0] - half * (hess[0][0] * dx[0] + hess[0][1] * dx[1]),
            dp_half[1] - half * (hess[1][0] * dx[0] + hess[1][1] * dx[1]),
        ];
        if k % renorm_every == 0 || k == steps {
            let n = (dx[0] * dx[0] + dx[1] * dx[1] + dp[0] * dp[0] + dp[1] * dp[1]).sqrt();
            if !n.is_finite() || n > 1e150 || n < 1e-150 {
                return Err(NmdError::invalid(format!(
                    "tangent norm {n:e} left the representable range; shrink the renormalization interval"
                )));
            }
            log_sum += n.ln();
            for v in dx.iter_mut().chain(dp.iter_mut()) {
                *v /= n;
            }
        }
    }
    Ok(log_sum / (steps as f64 * dt))
}
