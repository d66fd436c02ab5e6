use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;
use crate::objective::Problem;
use crate::scalar::Scalar;
use crate::trajectory::ControlTrajectory;

use super::kkt::{classify, Activity};
use super::{project, OptimizerConfig};

/// Additive slack of the quadratic-growth fit.
pub const GROWTH_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SoncReport<T> {
    /// `min F''(u)[v, v]` over the sampled unit directions (`+∞` if the
    /// cone is trivial).
    pub min_value: T,
    pub argmin_direction: Option<ControlTrajectory<T>>,
    /// Every entry of every direction was forced to zero.
    pub degenerate: bool,
    /// Number of entries left free in the sampled cone.
    pub free_entries: usize,
    /// Free-entry counts at `critical_tol` scaled by [`SENSITIVITY_FACTORS`].
    pub threshold_sensitivity: Vec<(T, usize)>,
    pub values: Vec<T>,
}

/// Multiples of `critical_tol` at which the cone size is re-counted.
pub const SENSITIVITY_FACTORS: [f64; 5] = [1e-2, 1e-1, 1.0, 1e1, 1e2];

fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng, like: &ControlTrajectory<T>) -> ControlTrajectory<T> {
    like.map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    })
}

/// Samples directions in the critical cone at `u` and evaluates the second
/// derivative on each.
///
/// The cone is `v ≥ 0` on lower-active entries, `v ≤ 0` on upper-active
/// entries and `v = 0` wherever `|Φ| > critical_tol`.
pub fn sonc_probe<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    n_samples: usize,
    seed: u64,
    config: &OptimizerConfig<T>,
) -> Result<SoncReport<T>> {
    let lin = problem.linearize(u)?;
    let classes = classify(problem, u, &lin.gradient, config.active_tol);
    let zeroed: Vec<bool> = lin
        .gradient
        .as_slice()
        .iter()
        .map(|g| g.abs() > config.critical_tol)
        .collect();
    let free_entries = zeroed.iter().filter(|&&z| !z).count();
    let threshold_sensitivity = SENSITIVITY_FACTORS
        .iter()
        .map(|&f| {
            let tol = config.critical_tol * T::lit(f);
            let free = lin.gradient.as_slice().iter().filter(|g| g.abs() <= tol);
            (tol, free.count())
        })
        .collect();
    if free_entries == 0 {
        return Ok(SoncReport {
            min_value: T::infinity(),
            argmin_direction: None,
            degenerate: true,
            free_entries,
            threshold_sensitivity,
            values: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<_> = (0..n_samples)
        .map(|_| {
            let mut v = gaussian(&mut rng, u);
            for ((x, c), &z) in v.as_mut_slice().iter_mut().zip(&classes).zip(&zeroed) {
                *x = match (z, c) {
                    (true, _) => T::zero(),
                    (false, Activity::ActiveLower) => x.abs(),
                    (false, Activity::ActiveUpper) => -x.abs(),
                    (false, Activity::Inactive) => *x,
                };
            }
            let n = v.norm();
            v.scaled(T::one() / n)
        })
        .collect();

    let values = directions
        .par_iter()
        .map(|v| lin.quadratic_form(v, v))
        .collect::<Result<Vec<T>>>()?;
    // first minimum in sample order, independent of scheduling
    let (best, min_value) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, T::infinity()),
                |acc, (j, q)| if q < acc.1 { (j, q) } else { acc },
            );
    Ok(SoncReport {
        min_value,
        argmin_direction: directions.into_iter().nth(best),
        degenerate: false,
        free_entries,
        threshold_sensitivity,
        values,
    })
}

#[derive(Debug, Clone)]
pub struct GrowthReport<T> {
    /// Largest `δ` with `F(u_j) ≥ F(ū) + (δ/2)‖u_j − ū‖² − slack` for all samples.
    pub delta_hat: T,
    pub value_bar: T,
    pub values: Vec<T>,
    pub distances: Vec<T>,
}

/// Quadratic-growth witness from random feasible perturbations
/// `u_j = P(ū + ε w_j)` with unit-norm Gaussian `w_j`.
pub fn quadratic_growth<T: Scalar>(
    problem: &Problem<T>,
    u_bar: &ControlTrajectory<T>,
    n_samples: usize,
    eps: T,
    seed: u64,
) -> Result<GrowthReport<T>> {
    let value_bar = problem.reduced_cost(u_bar)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<_> = (0..n_samples)
        .map(|_| {
            let w = gaussian(&mut rng, u_bar);
            let w = w.scaled(eps / w.norm());
            project(
                &u_bar.add_scaled(T::one(), &w),
                &problem.u_min,
                &problem.u_max,
            )
        })
        .collect();
    let values = points
        .par_iter()
        .map(|p| problem.reduced_cost(p))
        .collect::<Result<Vec<T>>>()?;
    let distances: Vec<T> = points
        .iter()
        .map(|p| p.add_scaled(-T::one(), u_bar).norm())
        .collect();
    let slack = T::lit(GROWTH_SLACK);
    let two = T::lit(2.0);
    let delta_hat = values
        .iter()
        .zip(&distances)
        .filter(|(_, &d)| d > T::zero())
        .map(|(&f, &d)| two * (f - value_bar + slack) / (d * d))
        .fold(T::infinity(), T::min);
    Ok(GrowthReport {
        delta_hat,
        value_bar,
        values,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProblemSpec;
    use crate::field::Field;
    use crate::objective::Discretization;

    fn problem(gamma: f64, beta: f64, lo: f64, hi: f64) -> Problem<f64> {
        let mut spec = ProblemSpec::diffusion(0.1, &[1.0], 1.0);
        spec.drift = vec![Field::parse("0.3").unwrap()];
        spec.control_field = vec![Field::parse("x*(1-x)").unwrap()];
        spec.alpha_q = 0.0;
        spec.alpha_omega = 0.0;
        spec.gamma = vec![gamma];
        spec.beta = vec![beta];
        spec.u_min = vec![Field::constant(lo)];
        spec.u_max = vec![Field::constant(hi)];
        Problem::new(&spec, &Discretization::new(&[6], 8)).unwrap()
    }

    #[test]
    fn untracked_values_are_control_term() {
        let p = problem(0.7, 0.0, -1.0, 1.0);
        let r = sonc_probe(&p, &p.zero_control(), 50, 3, &OptimizerConfig::default()).unwrap();
        assert!(!r.degenerate);
        assert_eq!(r.values.len(), 50);
        for q in &r.values {
            assert!((q - 1.4).abs() <= 1e-12);
        }
        let v = r.argmin_direction.unwrap();
        assert!((v.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn strictly_active_point_is_degenerate() {
        let p = problem(1.0, 50.0, 0.0, 1.0);
        let r = sonc_probe(&p, &p.zero_control(), 10, 0, &OptimizerConfig::default()).unwrap();
        assert!(r.degenerate);
        assert!(r.min_value.is_infinite());
    }

    #[test]
    fn sensitivity_counts_grow_with_threshold() {
        // Φ = 2u + β on a decoupled problem; β = 2e-6 at u = 0 sits between
        // the 1x and 10x thresholds
        let p = problem(1.0, 2e-6, -1.0, 1.0);
        let r = sonc_probe(&p, &p.zero_control(), 4, 0, &OptimizerConfig::default()).unwrap();
        let counts: Vec<usize> = r.threshold_sensitivity.iter().map(|t| t.1).collect();
        let n = p.nt();
        assert_eq!(counts, vec![0, 0, 0, n, n]);
        assert!(r.degenerate);
    }

    #[test]
    fn probe_is_seed_deterministic() {
        let p = problem(0.5, 0.0, -1.0, 1.0);
        let cfg = OptimizerConfig::default();
        let a = sonc_probe(&p, &p.constant_control(0.2), 20, 9, &cfg).unwrap();
        let b = sonc_probe(&p, &p.constant_control(0.2), 20, 9, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn growth_of_pure_quadratic() {
        // F = Σ dt u² with minimizer 0: exact growth constant 2
        let p = problem(1.0, 0.0, -1.0, 1.0);
        let r = quadratic_growth(&p, &p.zero_control(), 30, 1e-2, 5).unwrap();
        assert!((r.delta_hat - 2.0).abs() <= 1e-6);
        assert!(r.distances.iter().all(|&d| d <= 1e-2 * (1.0 + 1e-12)));
    }
}
