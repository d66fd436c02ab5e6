use log::debug;

use crate::error::{Error, Result};
use crate::objective::{Linearization, Problem};
use crate::scalar::Scalar;
use crate::trajectory::ControlTrajectory;

use super::kkt::report_from_gradient;
use super::pgd::{projected_gradient_step, PgStep};
use super::{
    non_finite, project, projected_gradient_norm, trial_value, IterationRecord, Method,
    OptimizerConfig, OptimizerReport, StopReason,
};

/// Entries held at a bound because the gradient pushes outward.
fn binding_mask<T: Scalar>(lin: &Linearization<'_, T>, tol: T) -> Vec<bool> {
    let pb = lin.problem();
    lin.u
        .as_slice()
        .iter()
        .zip(lin.gradient.as_slice())
        .zip(pb.u_min.as_slice().iter().zip(pb.u_max.as_slice()))
        .map(|((&v, &g), (&lo, &hi))| {
            let eps = tol * (hi - lo);
            (v - lo <= eps && g > T::zero()) || (hi - v <= eps && g < T::zero())
        })
        .collect()
}

fn mask<T: Scalar>(v: &mut ControlTrajectory<T>, bound: &[bool]) {
    for (x, &b) in v.as_mut_slice().iter_mut().zip(bound) {
        if b {
            *x = T::zero();
        }
    }
}

/// Truncated CG on `H_FF d = −Φ_F` in the discrete L² inner product.
fn newton_direction<T: Scalar>(
    lin: &Linearization<'_, T>,
    bound: &[bool],
    config: &OptimizerConfig<T>,
) -> Result<ControlTrajectory<T>> {
    let mut r = lin.gradient.scaled(-T::one());
    mask(&mut r, bound);
    let mut d = r.map(|_| T::zero());
    let r0 = r.norm();
    if r0 == T::zero() {
        return Ok(d);
    }
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for it in 0..config.cg_max {
        let mut hp = lin.hessian_vector_product(&p)?;
        mask(&mut hp, bound);
        let curv = p.dot(&hp);
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN counts as nonpositive
        if !(curv > T::zero()) {
            debug!("pncg: nonpositive curvature at cg iteration {it}");
            if it == 0 {
                d = r.clone();
            }
            break;
        }
        let a = rr / curv;
        d = d.add_scaled(a, &p);
        r = r.add_scaled(-a, &hp);
        let rr_new = r.dot(&r);
        if rr_new.sqrt() <= config.cg_tol * r0 {
            break;
        }
        p = r.add_scaled(rr_new / rr, &p);
        rr = rr_new;
    }
    Ok(d)
}

enum NewtonStep<'p, T> {
    Accepted(Linearization<'p, T>, T),
    Rejected,
}

fn newton_step<'p, T: Scalar>(
    problem: &'p Problem<T>,
    lin: &Linearization<'p, T>,
    d: &ControlTrajectory<T>,
    config: &OptimizerConfig<T>,
) -> Result<NewtonStep<'p, T>> {
    let mut s = T::one();
    for _ in 0..=config.max_backtracks {
        let cand = project(&lin.u.add_scaled(s, d), &problem.u_min, &problem.u_max);
        let slope = lin.gradient.dot(&cand.add_scaled(-T::one(), &lin.u));
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(slope < T::zero()) {
            return Ok(NewtonStep::Rejected);
        }
        if let Some((value, rho)) = trial_value(problem, &cand)? {
            if value <= lin.value + config.armijo_c * slope {
                let next = problem.linearize_with_state(&cand, rho, value)?;
                return Ok(NewtonStep::Accepted(next, s));
            }
        }
        s = s * config.backtrack;
    }
    Ok(NewtonStep::Rejected)
}

/// Projected Newton-CG: truncated CG on the free coordinates, projected
/// Armijo search along the Newton direction, and a projected-gradient step
/// whenever the Newton direction fails to descend.
pub fn solve_pncg<T: Scalar>(
    problem: &Problem<T>,
    u0: &ControlTrajectory<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizerReport<T>> {
    config.validate()?;
    if !problem.gamma.iter().all(|&g| g > T::zero()) {
        return Err(Error::Spec(
            "projected Newton-CG requires every gamma to be positive".into(),
        ));
    }
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
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    loop {
        if history.last().unwrap().pg_norm <= config.tol_pg {
            stop = StopReason::Converged;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        let bound = binding_mask(&lin, config.active_tol);
        let d = newton_direction(&lin, &bound, config)?;
        let (next, step) = match newton_step(problem, &lin, &d, config)? {
            NewtonStep::Accepted(next, s) => (next, s),
            NewtonStep::Rejected => {
                match projected_gradient_step(problem, &lin, config.step0, config)? {
                    PgStep::Accepted { lin: next, step } => {
                        debug!("pncg iter {}: gradient fallback", iterations + 1);
                        (next, step)
                    }
                    PgStep::Failed => {
                        stop = StopReason::LineSearchFailed;
                        break;
                    }
                }
            }
        };
        iterations += 1;
        if !(next.value.is_finite() && next.gradient.is_finite()) {
            return Err(non_finite(iterations, &next.u));
        }
        debug!(
            "pncg iter {iterations}: F = {:e}, step {:e}",
            next.value, step
        );
        history.push(IterationRecord {
            iter: iterations,
            value: next.value,
            pg_norm: projected_gradient_norm(problem, &next.u, &next.gradient),
            step,
        });
        lin = next;
    }
    let kkt = report_from_gradient(problem, &lin.u, &lin.gradient, config.active_tol);
    Ok(OptimizerReport {
        method: Method::ProjectedNewtonCg,
        history,
        value: lin.value,
        u: lin.u,
        gradient: lin.gradient,
        kkt,
        stop,
        iterations,
    })
}
