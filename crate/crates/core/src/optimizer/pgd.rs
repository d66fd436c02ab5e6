use log::debug;

use crate::error::Result;
use crate::objective::{Linearization, Problem};
use crate::scalar::Scalar;
use crate::trajectory::ControlTrajectory;

use super::kkt::report_from_gradient;
use super::{
    non_finite, project, projected_gradient_norm, trial_value, IterationRecord, Method,
    OptimizerConfig, OptimizerReport, StopReason,
};

/// Outcome of one projected-gradient line search.
pub(crate) enum PgStep<'p, T> {
    Accepted { lin: Linearization<'p, T>, step: T },
    Failed,
}

/// Backtracking along the projection arc `u(s) = P(u − sΦ)` until
/// `F(u(s)) ≤ F(u) − (c/s)‖u(s) − u‖²`.
pub(crate) fn projected_gradient_step<'p, T: Scalar>(
    problem: &'p Problem<T>,
    lin: &Linearization<'p, T>,
    trial: T,
    config: &OptimizerConfig<T>,
) -> Result<PgStep<'p, T>> {
    let mut s = trial;
    for _ in 0..=config.max_backtracks {
        let cand = project(
            &lin.u.add_scaled(-s, &lin.gradient),
            &problem.u_min,
            &problem.u_max,
        );
        let d = cand.add_scaled(-T::one(), &lin.u);
        let dn2 = d.dot(&d);
        if dn2 == T::zero() {
            return Ok(PgStep::Failed);
        }
        if let Some((value, rho)) = trial_value(problem, &cand)? {
            if value <= lin.value - config.armijo_c / s * dn2 {
                let next = problem.linearize_with_state(&cand, rho, value)?;
                return Ok(PgStep::Accepted { lin: next, step: s });
            }
        }
        s = s * config.backtrack;
    }
    Ok(PgStep::Failed)
}

/// Barzilai–Borwein step `⟨Δu, Δu⟩ / ⟨Δu, ΔΦ⟩`, if the curvature is positive.
pub(crate) fn spectral_step<T: Scalar>(
    prev: &Linearization<'_, T>,
    next: &Linearization<'_, T>,
) -> Option<T> {
    let du = next.u.add_scaled(-T::one(), &prev.u);
    let dg = next.gradient.add_scaled(-T::one(), &prev.gradient);
    let sy = du.dot(&dg);
    let ss = du.dot(&du);
    if sy > T::zero() && ss > T::zero() {
        let s = ss / sy;
        s.is_finite()
            .then(|| s.max(T::lit(1e-12)).min(T::lit(1e12)))
    } else {
        None
    }
}

/// Projected gradient descent with Armijo backtracking.
pub fn solve_pgd<T: Scalar>(
    problem: &Problem<T>,
    u0: &ControlTrajectory<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizerReport<T>> {
    config.validate()?;
    let u = project(u0, &problem.u_min, &problem.u_max);
    let mut lin = problem.linearize(&u)?;
    if !(lin.value.is_finite() && lin.gradient.is_finite()) {
        return Err(non_finite(0, &lin.u));
    }
    let mut history = vec![IterationRecord {
        iter: 0,
        value: lin.value,
        pg_norm: projected_gradient_norm(problem, &lin.u, &lin.gradient),
        step: T::zero(),
    }];
    let mut trial = config.step0;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    loop {
        let pg = history.last().unwrap().pg_norm;
        if pg <= config.tol_pg {
            stop = StopReason::Converged;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        let next = match projected_gradient_step(problem, &lin, trial, config)? {
            PgStep::Accepted { lin: next, step } => {
                debug!(
                    "pgd iter {}: F = {:e}, step {:e}",
                    iterations + 1,
                    next.value,
                    step
                );
                trial = if config.spectral_step {
                    spectral_step(&lin, &next).unwrap_or(config.step0)
                } else {
                    config.step0
                };
                history.push(IterationRecord {
                    iter: iterations + 1,
                    value: next.value,
                    pg_norm: projected_gradient_norm(problem, &next.u, &next.gradient),
                    step,
                });
                next
            }
            PgStep::Failed => {
                stop = StopReason::LineSearchFailed;
                break;
            }
        };
        iterations += 1;
        if !(next.value.is_finite() && next.gradient.is_finite()) {
            return Err(non_finite(iterations, &next.u));
        }
        lin = next;
    }
    let kkt = report_from_gradient(problem, &lin.u, &lin.gradient, config.active_tol);
    Ok(OptimizerReport {
        method: Method::ProjectedGradient,
        history,
        value: lin.value,
        u: lin.u,
        gradient: lin.gradient,
        kkt,
        stop,
        iterations,
    })
}
