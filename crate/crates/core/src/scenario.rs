//! Reference and randomized scenarios for verification runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{FluxScheme, ProblemSpec};
use crate::error::Result;
use crate::field::Field;
use crate::objective::{Discretization, Problem};
use crate::trajectory::ControlTrajectory;

/// Ranges for [`random_problem`].
#[derive(Debug, Clone)]
pub struct RandomOptions {
    /// Fixed dimension, or `None` to draw 1 or 2.
    pub dim: Option<usize>,
    pub max_cells_1d: usize,
    pub max_cells_2d: usize,
    pub max_steps: usize,
    pub scheme: FluxScheme,
    pub theta: f64,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self {
            dim: None,
            max_cells_1d: 32,
            max_cells_2d: 8,
            max_steps: 32,
            scheme: FluxScheme::Central,
            theta: 1.0,
        }
    }
}

const AXES: [&str; 2] = ["x", "y"];

/// Random problem with smooth coefficients, `b` vanishing on the boundary,
/// a random unit-mass initial density and random weights and bounds.
pub fn random_problem(seed: u64, opts: &RandomOptions) -> Result<Problem<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = opts.dim.unwrap_or_else(|| rng.random_range(1..=2));
    let extent: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let max_cells = if d == 1 {
        opts.max_cells_1d
    } else {
        opts.max_cells_2d
    };
    let cells: Vec<usize> = (0..d)
        .map(|_| rng.random_range(3..=max_cells.max(3)))
        .collect();
    let nt = rng.random_range(4..=opts.max_steps.max(4));
    let vol: f64 = extent.iter().product();

    let mut spec = ProblemSpec::diffusion(
        rng.random_range(0.02..0.5),
        &extent,
        rng.random_range(0.2..1.0),
    );
    spec.drift = (0..d)
        .map(|j| {
            let e = format!(
                "{:.6}*sin({:.6}*{} + {:.6})",
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..4.0),
                AXES[j],
                rng.random_range(0.0..3.0)
            );
            Field::parse(&e)
        })
        .collect::<Result<_>>()?;
    spec.control_field = (0..d)
        .map(|j| {
            let x = AXES[j];
            let e = format!(
                "{:.6}*{x}*({:.16}-{x})*(1 + 0.3*cos({:.6}*{}))",
                rng.random_range(0.5..2.0),
                extent[j],
                rng.random_range(0.0..3.0),
                AXES[(j + 1) % d.max(1)]
            );
            Field::parse(&e)
        })
        .collect::<Result<_>>()?;

    let n: usize = cells.iter().product();
    let mut rho0: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.2)).collect();
    let cell_vol = vol / n as f64;
    let m: f64 = rho0.iter().sum::<f64>() * cell_vol;
    rho0.iter_mut().for_each(|r| *r /= m);
    spec.rho0 = Field::Table(rho0);

    spec.rho_q = Field::parse(&format!(
        "{:.16}*(1 + {:.6}*cos({:.6}*x)*sin(3*t))",
        1.0 / vol,
        rng.random_range(0.0..0.5),
        rng.random_range(0.5..3.0)
    ))?;
    spec.rho_omega = Field::parse(&format!(
        "{:.16}*(1 + {:.6}*sin({:.6}*x))",
        1.0 / vol,
        rng.random_range(0.0..0.5),
        rng.random_range(0.5..3.0)
    ))?;
    spec.alpha_q = rng.random_range(0.1..2.0);
    spec.alpha_omega = rng.random_range(0.0..2.0);
    spec.gamma = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
    spec.beta = (0..d).map(|_| rng.random_range(-0.2..0.2)).collect();
    spec.u_min = (0..d)
        .map(|_| Field::constant(rng.random_range(-2.0..-0.5)))
        .collect();
    spec.u_max = (0..d)
        .map(|_| Field::constant(rng.random_range(0.5..2.0)))
        .collect();

    let disc = Discretization {
        cells,
        nt,
        theta: opts.theta,
        scheme: opts.scheme,
        second_order: false,
    };
    Problem::new(&spec, &disc)
}

/// Uniform random control inside the bounds of `problem`.
pub fn random_control(problem: &Problem<f64>, seed: u64) -> ControlTrajectory<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem.u_min.zip_map(&problem.u_max, |lo, hi| {
        lo + (hi - lo) * rng.random::<f64>()
    })
}

/// `b ≡ 0`, no tracking: `F(u) = γ Σ dt u² + β Σ dt u` on `[lo, hi]`.
pub fn decoupled_spec(gamma: f64, beta: f64, lo: f64, hi: f64) -> ProblemSpec<f64> {
    let mut spec = ProblemSpec::diffusion(0.1, &[1.0], 1.0);
    spec.gamma = vec![gamma];
    spec.beta = vec![beta];
    spec.u_min = vec![Field::constant(lo)];
    spec.u_max = vec![Field::constant(hi)];
    spec
}

/// Recovery problem: the running target is the state of a known interior
/// control `u★(t) = sin(2πt)`, with `γ = 1e-6`, `β = 0` and bounds `[−2, 2]`
/// on a 1D grid of 32 cells and 64 steps. Returns the problem and `u★`.
pub fn inverse_crime() -> Result<(Problem<f64>, ControlTrajectory<f64>)> {
    let mut spec = ProblemSpec::diffusion(0.1, &[1.0], 1.0);
    spec.control_field = vec![Field::parse("4*x*(1-x)")?];
    spec.rho0 = Field::parse("1 + 0.5*cos(pi*x)")?;
    spec.alpha_q = 10.0;
    spec.alpha_omega = 0.0;
    spec.gamma = vec![1e-6];
    spec.beta = vec![0.0];
    spec.u_min = vec![Field::constant(-2.0)];
    spec.u_max = vec![Field::constant(2.0)];
    let base = Problem::new(&spec, &Discretization::new(&[32], 64))?;
    let u_star = ControlTrajectory::from_components(
        &[Field::parse("sin(2*pi*t)")?.sample_steps(base.nt(), base.dt())?],
        base.dt(),
    )?;
    let problem = base.with_targets_from(&u_star)?;
    Ok((problem, u_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_problems_are_reproducible_and_valid() {
        let opts = RandomOptions::default();
        for seed in 0..10 {
            let a = random_problem(seed, &opts).unwrap();
            let b = random_problem(seed, &opts).unwrap();
            assert_eq!(a.rho0, b.rho0);
            assert!(a.assumptions.control_boundary_ok);
            let u = random_control(&a, seed);
            assert_eq!(u, crate::optimizer::project(&u, &a.u_min, &a.u_max));
        }
    }

    #[test]
    fn inverse_crime_target_is_attained() {
        let (p, u) = inverse_crime().unwrap();
        let f = p.reduced_cost(&u).unwrap();
        // only the control cost remains: γ Σ dt sin² = γ/2
        assert!((f - 0.5e-6).abs() <= 1e-15);
    }
}
