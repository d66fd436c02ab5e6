//! Backward adjoint of the discrete forward scheme.
//!
//! The adjoint is the algebraic transpose of the θ-scheme, so pairing it
//! with the linearized state reproduces the derivative of the discrete cost
//! exactly. With `S_k = M + dtθA_k` and `R_k = M − dt(1−θ)A_k`:
//!
//! ```text
//! S_ntᵀ p^nt = g_nt
//! S_kᵀ  p^k  = R_{k+1}ᵀ p^{k+1} + g_k,      k = nt−1, …, 1
//! M     p^0  = R_1ᵀ p^1
//! ```
//!
//! where `g_k = α_Q dt M(ρ^k − ρ_Q^k)`, plus `α_Ω M(ρ^nt − ρ_Ω)` at `k = nt`.
//! `p^0` is the sensitivity with respect to the initial datum.

use crate::domain::DiscreteOperators;
use crate::error::{Error, Result};
use crate::forward::{check_control, check_theta, Stepper};
use crate::scalar::{self, Scalar};
use crate::trajectory::{ControlTrajectory, Role, StateTrajectory};

/// Tracking data of the cost functional.
#[derive(Debug, Clone, Copy)]
pub struct Tracking<'a, T> {
    /// Running target at every time level (level 0 unused).
    pub rho_q: &'a StateTrajectory<T>,
    pub rho_omega: &'a [T],
    pub alpha_q: T,
    pub alpha_omega: T,
}

pub fn solve_adjoint<T: Scalar>(
    ops: &DiscreteOperators<T>,
    u: &ControlTrajectory<T>,
    rho: &StateTrajectory<T>,
    targets: &Tracking<'_, T>,
    theta: T,
) -> Result<StateTrajectory<T>> {
    let n = ops.n_cells();
    let nt = u.nt();
    if targets.rho_q.n_cells() != n || targets.rho_q.nt() != nt {
        return Err(Error::Shape {
            what: "running target",
            expected: n * (nt + 1),
            got: targets.rho_q.as_slice().len(),
        });
    }
    if targets.rho_omega.len() != n {
        return Err(Error::Shape {
            what: "terminal target",
            expected: n,
            got: targets.rho_omega.len(),
        });
    }
    if rho.n_cells() != n || rho.nt() != nt {
        return Err(Error::Shape {
            what: "state trajectory",
            expected: n * (nt + 1),
            got: rho.as_slice().len(),
        });
    }
    let dt = u.dt();
    let wq = targets.alpha_q * dt;
    backward(ops, u, theta, |k, g| {
        let r = rho.level(k);
        let q = targets.rho_q.level(k);
        for c in 0..n {
            g[c] = ops.mass[c] * wq * (r[c] - q[c]);
        }
        if k == nt && targets.alpha_omega != T::zero() {
            for c in 0..n {
                g[c] = g[c] + targets.alpha_omega * ops.mass[c] * (r[c] - targets.rho_omega[c]);
            }
        }
    })
}

/// Transposed sweep with user sources `g_k`, `k = 1..=nt` (the closure
/// overwrites its buffer).
pub(crate) fn backward<T: Scalar>(
    ops: &DiscreteOperators<T>,
    u: &ControlTrajectory<T>,
    theta: T,
    mut source: impl FnMut(usize, &mut [T]),
) -> Result<StateTrajectory<T>> {
    check_theta(theta)?;
    check_control(ops, u)?;
    let n = ops.n_cells();
    let nt = u.nt();
    let mut p = StateTrajectory::zeros(n, nt, u.dt(), Role::Adjoint);
    let mut stepper = Stepper::new(ops, u.dt(), theta);
    let mut rhs = vec![T::zero(); n];
    let mut g = vec![T::zero(); n];
    for k in (1..=nt).rev() {
        if k < nt {
            let next = stepper.system(u.step(k), k + 1)?;
            next.explicit_transpose(&ops.mass, p.level(k + 1), &mut rhs);
        } else {
            rhs.iter_mut().for_each(|x| *x = T::zero());
        }
        source(k, &mut g);
        scalar::axpy(T::one(), &g, &mut rhs);
        let sys = stepper.system(u.step(k - 1), k)?;
        sys.lu.solve_transpose_in_place(&mut rhs);
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        p.level_mut(k).copy_from_slice(&rhs);
    }
    let first = stepper.system(u.step(0), 1)?;
    first.explicit_transpose(&ops.mass, p.level(1), &mut rhs);
    for (r, &m) in rhs.iter_mut().zip(&ops.mass) {
        *r = *r / m;
    }
    p.level_mut(0).copy_from_slice(&rhs);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{assemble, FluxScheme, ProblemSpec};
    use crate::field::Field;
    use crate::forward::solve_forward;
    use crate::grid::Grid;

    fn setup() -> (DiscreteOperators<f64>, ControlTrajectory<f64>, Vec<f64>) {
        let mut s = ProblemSpec::diffusion(0.1, &[1.0], 1.0);
        s.drift = vec![Field::parse("0.2").unwrap()];
        s.control_field = vec![Field::parse("x*(1-x)").unwrap()];
        let g = Grid::new(&[1.0], &[10]).unwrap();
        let ops = assemble(&s, &g, &[(-1.0, 1.0)], FluxScheme::Central).unwrap();
        let u = ControlTrajectory::from_values(1, 0.1, (0..10).map(|s| (s as f64).sin()).collect())
            .unwrap();
        let rho0 = (0..10).map(|i| 0.5 + i as f64 / 9.0).collect();
        (ops, u, rho0)
    }

    #[test]
    fn zero_weights_give_zero_adjoint() {
        let (ops, u, rho0) = setup();
        let rho = solve_forward(&ops, &u, &rho0, 1.0).unwrap();
        let q = StateTrajectory::zeros(10, 10, 0.1, Role::Density);
        let t = Tracking {
            rho_q: &q,
            rho_omega: &[0.3; 10],
            alpha_q: 0.0,
            alpha_omega: 0.0,
        };
        let p = solve_adjoint(&ops, &u, &rho, &t, 1.0).unwrap();
        assert!(p.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_residuals_give_zero_adjoint() {
        let (ops, u, rho0) = setup();
        for theta in [0.5, 1.0] {
            let rho = solve_forward(&ops, &u, &rho0, theta).unwrap();
            let t = Tracking {
                rho_q: &rho,
                rho_omega: rho.level(10),
                alpha_q: 2.0,
                alpha_omega: 3.0,
            };
            let p = solve_adjoint(&ops, &u, &rho, &t, theta).unwrap();
            assert!(p.as_slice().iter().all(|&x| x == 0.0));
            assert_eq!(p.role(), Role::Adjoint);
        }
    }

    #[test]
    fn linear_in_residual_data() {
        let (ops, u, rho0) = setup();
        let rho = solve_forward(&ops, &u, &rho0, 1.0).unwrap();
        let zero_q = StateTrajectory::zeros(10, 10, 0.1, Role::Density);
        let mk = |alpha_q: f64, alpha_omega: f64| {
            let t = Tracking {
                rho_q: &zero_q,
                rho_omega: &[0.0; 10],
                alpha_q,
                alpha_omega,
            };
            solve_adjoint(&ops, &u, &rho, &t, 1.0).unwrap()
        };
        let pq = mk(1.0, 0.0);
        let po = mk(0.0, 1.0);
        let both = mk(2.0, 3.0);
        for ((a, b), c) in pq.as_slice().iter().zip(po.as_slice()).zip(both.as_slice()) {
            assert!((2.0 * a + 3.0 * b - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }
}
