//! Finite-difference verification of the reduced gradient and second
//! derivative.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::objective::Problem;
use crate::scalar::Scalar;
use crate::trajectory::ControlTrajectory;

/// Worst relative error over all directions, per step size.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSweep<T> {
    pub eps: Vec<T>,
    pub max_rel_error: Vec<T>,
}

impl<T: Scalar> FdSweep<T> {
    pub fn at(&self, eps: T) -> Option<T> {
        self.eps
            .iter()
            .position(|&e| e == eps)
            .map(|j| self.max_rel_error[j])
    }

    pub fn best(&self) -> T {
        self.max_rel_error
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }

    /// Truncation error dominates at the largest step and round-off at the
    /// smallest, so the minimum sits strictly inside the sweep.
    pub fn is_v_shaped(&self) -> bool {
        let n = self.max_rel_error.len();
        if n < 3 {
            return false;
        }
        let j = (0..n)
            .min_by(|&a, &b| {
                self.max_rel_error[a]
                    .partial_cmp(&self.max_rel_error[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        j > 0 && j + 1 < n
    }
}

/// `FD_EPS = {1e-3, …, 1e-7}`.
pub fn default_eps<T: Scalar>() -> Vec<T> {
    (3..=7).map(|p| T::lit(10f64.powi(-p))).collect()
}

/// Unit-norm Gaussian directions.
pub fn random_directions<T: Scalar>(
    problem: &Problem<T>,
    n: usize,
    seed: u64,
) -> Vec<ControlTrajectory<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let like = problem.zero_control();
    (0..n)
        .map(|_| {
            let v = like.map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z)
            });
            let norm = v.norm();
            v.scaled(T::one() / norm)
        })
        .collect()
}

fn rel<T: Scalar>(approx: T, exact: T) -> T {
    let scale = exact.abs().max(approx.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (approx - exact).abs() / scale
    }
}

/// Central differences `(F(u+εv) − F(u−εv)) / 2ε` against `⟨Φ, v⟩`.
pub fn gradient_sweep<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    directions: &[ControlTrajectory<T>],
    eps: &[T],
) -> Result<FdSweep<T>> {
    let phi = problem.gradient(u)?;
    let mut worst = vec![T::zero(); eps.len()];
    for v in directions {
        let exact = phi.dot(v);
        for (w, &e) in worst.iter_mut().zip(eps) {
            let fp = problem.reduced_cost(&u.add_scaled(e, v))?;
            let fm = problem.reduced_cost(&u.add_scaled(-e, v))?;
            let fd = (fp - fm) / (T::lit(2.0) * e);
            *w = w.max(rel(fd, exact));
        }
    }
    Ok(FdSweep {
        eps: eps.to_vec(),
        max_rel_error: worst,
    })
}

/// Second central differences `(F(u+εv) − 2F(u) + F(u−εv)) / ε²` against
/// `F''(u)[v, v]`.
pub fn hessian_sweep<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    directions: &[ControlTrajectory<T>],
    eps: &[T],
) -> Result<FdSweep<T>> {
    let lin = problem.linearize(u)?;
    let f0 = lin.value;
    let mut worst = vec![T::zero(); eps.len()];
    for v in directions {
        let exact = lin.quadratic_form(v, v)?;
        for (w, &e) in worst.iter_mut().zip(eps) {
            let fp = problem.reduced_cost(&u.add_scaled(e, v))?;
            let fm = problem.reduced_cost(&u.add_scaled(-e, v))?;
            let fd = (fp - T::lit(2.0) * f0 + fm) / (e * e);
            *w = w.max(rel(fd, exact));
        }
    }
    Ok(FdSweep {
        eps: eps.to_vec(),
        max_rel_error: worst,
    })
}

/// Largest relative asymmetry `|q(v,w) − q(w,v)|` and `|⟨Hv,w⟩ − ⟨v,Hw⟩|` over
/// consecutive pairs of `directions`.
pub fn hessian_symmetry<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    directions: &[ControlTrajectory<T>],
) -> Result<T> {
    let lin = problem.linearize(u)?;
    let mut worst = T::zero();
    for pair in directions.windows(2) {
        let (v, w) = (&pair[0], &pair[1]);
        let qvw = lin.quadratic_form(v, w)?;
        let qwv = lin.quadratic_form(w, v)?;
        worst = worst.max(rel(qvw, qwv));
        let hv = lin.hessian_vector_product(v)?;
        let hw = lin.hessian_vector_product(w)?;
        worst = worst.max(rel(hv.dot(w), v.dot(&hw)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProblemSpec;
    use crate::field::Field;
    use crate::objective::Discretization;

    #[test]
    fn v_shape_detection() {
        let mk = |v: Vec<f64>| FdSweep {
            eps: default_eps(),
            max_rel_error: v,
        };
        assert!(mk(vec![1e-6, 1e-8, 1e-10, 1e-9, 1e-8]).is_v_shaped());
        assert!(!mk(vec![1e-6, 1e-7, 1e-8, 1e-9, 1e-10]).is_v_shaped());
        assert_eq!(mk(vec![3.0, 1.0, 2.0, 4.0, 5.0]).best(), 1.0);
        assert_eq!(mk(vec![3.0, 1.0, 2.0, 4.0, 5.0]).at(1e-4), Some(1.0));
    }

    #[test]
    fn quadratic_cost_is_differenced_exactly() {
        let mut spec = ProblemSpec::diffusion(0.1, &[1.0], 1.0);
        spec.beta = vec![0.5];
        spec.u_min = vec![Field::constant(-2.0)];
        let p = Problem::new(&spec, &Discretization::new(&[4], 16)).unwrap();
        let dirs = random_directions(&p, 4, 11);
        let u = p.constant_control(0.3);
        let g = gradient_sweep(&p, &u, &dirs, &[1e-3]).unwrap();
        assert!(g.max_rel_error[0] <= 1e-9);
        let h = hessian_sweep(&p, &u, &dirs, &[1e-2]).unwrap();
        assert!(h.max_rel_error[0] <= 1e-8);
        assert!(hessian_symmetry(&p, &u, &dirs).unwrap() <= 1e-14);
    }
}
