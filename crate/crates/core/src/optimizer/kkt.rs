use crate::error::Result;
use crate::objective::Problem;
use crate::scalar::Scalar;
use crate::trajectory::ControlTrajectory;

use super::projected_gradient_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    ActiveLower,
    ActiveUpper,
    Inactive,
}

impl Activity {
    pub fn label(self) -> &'static str {
        match self {
            Activity::ActiveLower => "lower",
            Activity::ActiveUpper => "upper",
            Activity::Inactive => "inactive",
        }
    }
}

/// Switching structure at a control: each entry is active at a bound or
/// inactive, and the residuals measure how far `Φ` is from satisfying
/// `Φ > 0 ⇒ u = u_min`, `Φ < 0 ⇒ u = u_max`, `u_min < u < u_max ⇒ Φ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport<T> {
    /// Step-major, same layout as the control.
    pub classes: Vec<Activity>,
    /// `max |Φ|` over inactive entries.
    pub stationarity_residual: T,
    /// `max(0, −Φ)` on lower-active and `max(0, Φ)` on upper-active entries.
    pub complementarity_violation: T,
    pub projected_gradient_norm: T,
    pub n_lower: usize,
    pub n_upper: usize,
    pub n_inactive: usize,
}

/// Classifies each entry by distance `≤ active_tol·(u_max − u_min)` to a
/// bound. Entries with a collapsed range are assigned by the sign of `Φ`.
pub fn classify<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    phi: &ControlTrajectory<T>,
    active_tol: T,
) -> Vec<Activity> {
    u.as_slice()
        .iter()
        .zip(phi.as_slice())
        .zip(
            problem
                .u_min
                .as_slice()
                .iter()
                .zip(problem.u_max.as_slice()),
        )
        .map(|((&v, &g), (&lo, &hi))| {
            let eps = active_tol * (hi - lo);
            let at_lo = v - lo <= eps;
            let at_hi = hi - v <= eps;
            match (at_lo, at_hi) {
                (true, true) if g < T::zero() => Activity::ActiveUpper,
                (true, _) => Activity::ActiveLower,
                (false, true) => Activity::ActiveUpper,
                (false, false) => Activity::Inactive,
            }
        })
        .collect()
}

pub(crate) fn report_from_gradient<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    phi: &ControlTrajectory<T>,
    active_tol: T,
) -> KktReport<T> {
    let classes = classify(problem, u, phi, active_tol);
    let mut stat = T::zero();
    let mut comp = T::zero();
    let (mut nl, mut nu, mut ni) = (0, 0, 0);
    for (c, &g) in classes.iter().zip(phi.as_slice()) {
        match c {
            Activity::Inactive => {
                ni += 1;
                stat = stat.max(g.abs());
            }
            Activity::ActiveLower => {
                nl += 1;
                comp = comp.max((-g).max(T::zero()));
            }
            Activity::ActiveUpper => {
                nu += 1;
                comp = comp.max(g.max(T::zero()));
            }
        }
    }
    KktReport {
        classes,
        stationarity_residual: stat,
        complementarity_violation: comp,
        projected_gradient_norm: projected_gradient_norm(problem, u, phi),
        n_lower: nl,
        n_upper: nu,
        n_inactive: ni,
    }
}

/// Evaluates `Φ(u)` and reports the switching structure.
pub fn kkt_report<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    active_tol: T,
) -> Result<KktReport<T>> {
    let phi = problem.gradient(u)?;
    Ok(report_from_gradient(problem, u, &phi, active_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProblemSpec;
    use crate::field::Field;
    use crate::objective::Discretization;

    fn problem(beta: f64, lo: f64, hi: f64) -> Problem<f64> {
        let mut spec = ProblemSpec::diffusion(0.1, &[1.0], 1.0);
        spec.beta = vec![beta];
        spec.u_min = vec![Field::constant(lo)];
        spec.u_max = vec![Field::constant(hi)];
        Problem::new(&spec, &Discretization::new(&[4], 8)).unwrap()
    }

    #[test]
    fn interior_optimum_is_all_inactive() {
        // Φ = 2u + 2 vanishes at u = −1
        let p = problem(2.0, -10.0, 10.0);
        let r = kkt_report(&p, &p.constant_control(-1.0), 1e-8).unwrap();
        assert_eq!(r.n_inactive, 8);
        assert!(r.stationarity_residual <= 1e-8);
        assert_eq!(r.complementarity_violation, 0.0);
        assert!(r.projected_gradient_norm <= 1e-8);
    }

    #[test]
    fn pinned_at_upper_with_negative_gradient() {
        // Φ = 2u − 5 < 0 at u = 1
        let p = problem(-5.0, -1.0, 1.0);
        let r = kkt_report(&p, &p.constant_control(1.0), 1e-8).unwrap();
        assert_eq!(r.n_upper, 8);
        assert!(r.classes.iter().all(|c| *c == Activity::ActiveUpper));
        assert_eq!(r.complementarity_violation, 0.0);
        assert_eq!(r.projected_gradient_norm, 0.0);
    }

    #[test]
    fn wrong_sign_is_a_violation() {
        // at the lower bound with Φ = 2(−1) + 0 < 0: moving up decreases F
        let p = problem(0.0, -1.0, 1.0);
        let r = kkt_report(&p, &p.constant_control(-1.0), 1e-8).unwrap();
        assert_eq!(r.n_lower, 8);
        assert_eq!(r.complementarity_violation, 2.0);
        assert!(r.projected_gradient_norm > 0.0);
    }

    #[test]
    fn collapsed_range_uses_gradient_sign() {
        let p = problem(-5.0, 0.5, 0.5);
        let r = kkt_report(&p, &p.constant_control(0.5), 1e-8).unwrap();
        assert_eq!(r.n_upper, 8);
        let p = problem(5.0, 0.5, 0.5);
        let r = kkt_report(&p, &p.constant_control(0.5), 1e-8).unwrap();
        assert_eq!(r.n_lower, 8);
    }
}
