//! Discrete cost, reduced functional, exact gradient and second derivative.
//!
//! ```text
//! J_h(ρ, u) = α_Q/2 Σ_{k=1}^{nt} dt ‖ρ^k − ρ_Q^k‖²_M + α_Ω/2 ‖ρ^nt − ρ_Ω‖²_M
//!           + Σ_i ( γ_i Σ_k dt (u_i^k)² + β_i Σ_k dt u_i^k )
//! ```
//!
//! The Tikhonov term carries no factor 1/2, so the gradient contains
//! `2 γ_i u_i`. All derivatives are those of the discrete functional
//! (discretize-then-optimize); the drift pairing `−∫ ρ b_i ∂_i p` is
//! evaluated as `−pᵀ D_{b,i} ρ^{⋆}` through the assembled operator.

use crate::adjoint::{backward, solve_adjoint, Tracking};
use crate::domain::{
    assemble, control_envelope, validate_assumptions, AssumptionReport, DiscreteOperators,
    FluxScheme, ProblemSpec, TimeGrid,
};
use crate::error::{Error, Result};
use crate::forward::{check_theta, solve_forward, solve_linearized, theta_weighted};
use crate::grid::Grid;
use crate::scalar::{self, Scalar};
use crate::trajectory::{ControlTrajectory, GradientTrajectory, Role, StateTrajectory};

/// Discretization parameters.
#[derive(Debug, Clone)]
pub struct Discretization<T> {
    pub cells: Vec<usize>,
    pub nt: usize,
    pub theta: T,
    pub scheme: FluxScheme,
    /// Request the `min γ_i > 0` check needed by second-order diagnostics.
    pub second_order: bool,
}

impl<T: Scalar> Discretization<T> {
    /// Implicit Euler with the default (central) flux.
    pub fn new(cells: &[usize], nt: usize) -> Self {
        Self {
            cells: cells.to_vec(),
            nt,
            theta: T::one(),
            scheme: FluxScheme::Central,
            second_order: false,
        }
    }
}

/// A fully discretized optimal control problem.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub grid: Grid<T>,
    pub time: TimeGrid<T>,
    pub ops: DiscreteOperators<T>,
    pub theta: T,
    pub rho0: Vec<T>,
    pub rho_q: StateTrajectory<T>,
    pub rho_omega: Vec<T>,
    pub alpha_q: T,
    pub alpha_omega: T,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub u_min: ControlTrajectory<T>,
    pub u_max: ControlTrajectory<T>,
    pub assumptions: AssumptionReport<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(spec: &ProblemSpec<T>, disc: &Discretization<T>) -> Result<Self> {
        spec.validate()?;
        check_theta(disc.theta)?;
        let grid = Grid::new(&spec.extent, &disc.cells)?;
        let time = TimeGrid::new(spec.final_time, disc.nt)?;
        let assumptions = validate_assumptions(spec, &grid, disc.second_order)?;
        let d = spec.dim();
        let sample = |fields: &[crate::field::Field<T>]| -> Result<Vec<Vec<T>>> {
            fields
                .iter()
                .map(|f| f.sample_steps(time.nt, time.dt))
                .collect()
        };
        let lo = sample(&spec.u_min)?;
        let hi = sample(&spec.u_max)?;
        for i in 0..d {
            if let Some(s) = (0..time.nt).find(|&s| lo[i][s] > hi[i][s]) {
                return Err(Error::Spec(format!(
                    "u_min > u_max for component {} at step {}",
                    i + 1,
                    s + 1
                )));
            }
        }
        let envelope = control_envelope(&lo, &hi);
        let ops = assemble(spec, &grid, &envelope, disc.scheme)?;
        let n = grid.n_cells();
        let rho_q = StateTrajectory::from_values(
            n,
            time.dt,
            Role::Density,
            spec.rho_q.sample_space_time(&grid, time.nt, time.dt)?,
        )?;
        let rho_omega = spec.rho_omega.sample_cells(&grid)?;
        Ok(Self {
            rho0: assumptions.rho0.clone(),
            u_min: ControlTrajectory::from_components(&lo, time.dt)?,
            u_max: ControlTrajectory::from_components(&hi, time.dt)?,
            grid,
            time,
            ops,
            theta: disc.theta,
            rho_q,
            rho_omega,
            alpha_q: spec.alpha_q,
            alpha_omega: spec.alpha_omega,
            gamma: spec.gamma.clone(),
            beta: spec.beta.clone(),
            assumptions,
        })
    }

    pub fn nt(&self) -> usize {
        self.time.nt
    }

    pub fn dt(&self) -> T {
        self.time.dt
    }

    pub fn n_controls(&self) -> usize {
        self.ops.n_controls()
    }

    pub fn zero_control(&self) -> ControlTrajectory<T> {
        ControlTrajectory::zeros(self.n_controls(), self.nt(), self.dt())
    }

    pub fn constant_control(&self, value: T) -> ControlTrajectory<T> {
        ControlTrajectory::constant(self.n_controls(), self.nt(), self.dt(), value)
    }

    pub fn tracking(&self) -> Tracking<'_, T> {
        Tracking {
            rho_q: &self.rho_q,
            rho_omega: &self.rho_omega,
            alpha_q: self.alpha_q,
            alpha_omega: self.alpha_omega,
        }
    }

    fn check_control(&self, u: &ControlTrajectory<T>) -> Result<()> {
        self.u_min.check_shape(u, "control trajectory")
    }

    /// Replaces the tracking targets by the state and terminal state of `u`
    /// (an attainable target, for recovery experiments).
    pub fn with_targets_from(mut self, u: &ControlTrajectory<T>) -> Result<Self> {
        let rho = self.state(u)?;
        self.rho_omega = rho.level(self.nt()).to_vec();
        self.rho_q = rho;
        Ok(self)
    }

    /// The state `G(u)`.
    pub fn state(&self, u: &ControlTrajectory<T>) -> Result<StateTrajectory<T>> {
        self.check_control(u)?;
        solve_forward(&self.ops, u, &self.rho0, self.theta)
    }

    /// `J_h(ρ, u)`.
    pub fn cost(&self, rho: &StateTrajectory<T>, u: &ControlTrajectory<T>) -> Result<T> {
        self.check_control(u)?;
        let n = self.grid.n_cells();
        if rho.n_cells() != n || rho.nt() != self.nt() {
            return Err(Error::Shape {
                what: "state trajectory",
                expected: n * (self.nt() + 1),
                got: rho.as_slice().len(),
            });
        }
        let dt = self.dt();
        let half = T::lit(0.5);
        let m = &self.ops.mass;
        let mut running = T::zero();
        if self.alpha_q != T::zero() {
            for k in 1..=self.nt() {
                let r: Vec<T> = rho
                    .level(k)
                    .iter()
                    .zip(self.rho_q.level(k))
                    .map(|(&a, &b)| a - b)
                    .collect();
                running = running + dt * scalar::weighted_dot(m, &r, &r);
            }
        }
        let terminal = if self.alpha_omega != T::zero() {
            let r: Vec<T> = rho
                .level(self.nt())
                .iter()
                .zip(&self.rho_omega)
                .map(|(&a, &b)| a - b)
                .collect();
            scalar::weighted_dot(m, &r, &r)
        } else {
            T::zero()
        };
        let mut control = T::zero();
        for i in 0..self.n_controls() {
            let (mut sq, mut lin) = (T::zero(), T::zero());
            for s in 0..self.nt() {
                let v = u.get(i, s);
                sq = sq + v * v;
                lin = lin + v;
            }
            control = control + dt * (self.gamma[i] * sq + self.beta[i] * lin);
        }
        Ok(half * self.alpha_q * running + half * self.alpha_omega * terminal + control)
    }

    /// `F(u) = J_h(G(u), u)`.
    pub fn reduced_cost(&self, u: &ControlTrajectory<T>) -> Result<T> {
        let rho = self.state(u)?;
        self.cost(&rho, u)
    }

    /// Forward and adjoint solves at `u`, reusable for first- and
    /// second-order queries.
    pub fn linearize(&self, u: &ControlTrajectory<T>) -> Result<Linearization<'_, T>> {
        let (value, rho) = self.evaluate(u)?;
        self.linearize_with_state(u, rho, value)
    }

    /// `(F(u), G(u))`.
    pub fn evaluate(&self, u: &ControlTrajectory<T>) -> Result<(T, StateTrajectory<T>)> {
        let rho = self.state(u)?;
        Ok((self.cost(&rho, u)?, rho))
    }

    /// Completes a linearization from an already computed state and value.
    pub fn linearize_with_state(
        &self,
        u: &ControlTrajectory<T>,
        rho: StateTrajectory<T>,
        value: T,
    ) -> Result<Linearization<'_, T>> {
        let adjoint = solve_adjoint(&self.ops, u, &rho, &self.tracking(), self.theta)?;
        let mut lin = Linearization {
            problem: self,
            u: u.clone(),
            rho,
            adjoint,
            value,
            gradient: self.zero_control(),
        };
        lin.gradient = lin.compute_gradient();
        Ok(lin)
    }

    /// `Φ` with `F'(u)v = ⟨Φ, v⟩`.
    pub fn gradient(&self, u: &ControlTrajectory<T>) -> Result<GradientTrajectory<T>> {
        Ok(self.linearize(u)?.gradient)
    }

    /// `F''(u)[v1, v2]`.
    pub fn quadratic_form(
        &self,
        u: &ControlTrajectory<T>,
        v1: &ControlTrajectory<T>,
        v2: &ControlTrajectory<T>,
    ) -> Result<T> {
        self.linearize(u)?.quadratic_form(v1, v2)
    }

    pub fn hessian_vector_product(
        &self,
        u: &ControlTrajectory<T>,
        v: &ControlTrajectory<T>,
    ) -> Result<ControlTrajectory<T>> {
        self.linearize(u)?.hessian_vector_product(v)
    }
}

/// State, adjoint, value and gradient at one control.
#[derive(Debug, Clone)]
pub struct Linearization<'p, T> {
    problem: &'p Problem<T>,
    pub u: ControlTrajectory<T>,
    pub rho: StateTrajectory<T>,
    pub adjoint: StateTrajectory<T>,
    pub value: T,
    pub gradient: GradientTrajectory<T>,
}

impl<'p, T: Scalar> Linearization<'p, T> {
    pub fn problem(&self) -> &'p Problem<T> {
        self.problem
    }

    /// `yᵀ D_{b,i} x^{⋆k}` for each (step, component), step-major.
    fn drift_pairings(&self, y: &StateTrajectory<T>, x: &StateTrajectory<T>) -> Vec<T> {
        let pb = self.problem;
        let d = pb.n_controls();
        let mut out = Vec::with_capacity(d * pb.nt());
        for k in 1..=pb.nt() {
            let star = theta_weighted(pb.theta, x.level(k), x.level(k - 1));
            for i in 0..d {
                out.push(pb.ops.control[i].bilinear(y.level(k), &star));
            }
        }
        out
    }

    fn compute_gradient(&self) -> GradientTrajectory<T> {
        let pb = self.problem;
        let d = pb.n_controls();
        let pair = self.drift_pairings(&self.adjoint, &self.rho);
        let two = T::lit(2.0);
        let vals = pair
            .iter()
            .enumerate()
            .map(|(j, &pd)| {
                let (s, i) = (j / d, j % d);
                -pd + two * pb.gamma[i] * self.u.get(i, s) + pb.beta[i]
            })
            .collect();
        ControlTrajectory::from_values(d, pb.dt(), vals).expect("gradient shape")
    }

    /// Linearized state `z = G'(u) v`.
    pub fn linearized_state(&self, v: &ControlTrajectory<T>) -> Result<StateTrajectory<T>> {
        solve_linearized(&self.problem.ops, &self.u, &self.rho, v, self.problem.theta)
    }

    /// Tracking part `α_Q Σ dt ⟨z1, z2⟩_M + α_Ω ⟨z1^nt, z2^nt⟩_M`.
    fn tracking_form(&self, z1: &StateTrajectory<T>, z2: &StateTrajectory<T>) -> T {
        let pb = self.problem;
        let m = &pb.ops.mass;
        let mut run = T::zero();
        if pb.alpha_q != T::zero() {
            for k in 1..=pb.nt() {
                run = run + scalar::weighted_dot(m, z1.level(k), z2.level(k));
            }
            run = run * pb.alpha_q * pb.dt();
        }
        let term = if pb.alpha_omega != T::zero() {
            pb.alpha_omega * scalar::weighted_dot(m, z1.level(pb.nt()), z2.level(pb.nt()))
        } else {
            T::zero()
        };
        run + term
    }

    fn control_form(&self, v1: &ControlTrajectory<T>, v2: &ControlTrajectory<T>) -> T {
        let pb = self.problem;
        let two = T::lit(2.0);
        let mut acc = T::zero();
        for i in 0..pb.n_controls() {
            let mut s = T::zero();
            for k in 0..pb.nt() {
                s = s + v1.get(i, k) * v2.get(i, k);
            }
            acc = acc + two * pb.gamma[i] * pb.dt() * s;
        }
        acc
    }

    /// `Σ_k dt Σ_i v_i^k · pᵀ D_{b,i} z^{⋆k}`.
    fn cross_form(&self, v: &ControlTrajectory<T>, z: &StateTrajectory<T>) -> T {
        let pair = self.drift_pairings(&self.adjoint, z);
        self.problem.dt() * scalar::dot(v.as_slice(), &pair)
    }

    pub fn quadratic_form(
        &self,
        v1: &ControlTrajectory<T>,
        v2: &ControlTrajectory<T>,
    ) -> Result<T> {
        self.u.check_shape(v1, "direction")?;
        self.u.check_shape(v2, "direction")?;
        let z1 = self.linearized_state(v1)?;
        let z2 = if v1 == v2 {
            z1.clone()
        } else {
            self.linearized_state(v2)?
        };
        Ok(
            self.tracking_form(&z1, &z2) - self.cross_form(v1, &z2) - self.cross_form(v2, &z1)
                + self.control_form(v1, v2),
        )
    }

    /// `H v` with `⟨H v, w⟩ = F''(u)[v, w]`, via a second-order adjoint sweep.
    pub fn hessian_vector_product(&self, v: &ControlTrajectory<T>) -> Result<ControlTrajectory<T>> {
        self.u.check_shape(v, "direction")?;
        let pb = self.problem;
        let ops = &pb.ops;
        let (n, nt, d) = (pb.grid.n_cells(), pb.nt(), pb.n_controls());
        let dt = pb.dt();
        let theta = pb.theta;
        let z = self.linearized_state(v)?;
        let p = &self.adjoint;
        let mut tmp = vec![T::zero(); n];
        let q = backward(ops, &self.u, theta, |k, g| {
            let zk = z.level(k);
            let wq = pb.alpha_q * dt;
            for c in 0..n {
                g[c] = ops.mass[c] * wq * zk[c];
            }
            if k == nt && pb.alpha_omega != T::zero() {
                for c in 0..n {
                    g[c] = g[c] + pb.alpha_omega * ops.mass[c] * zk[c];
                }
            }
            for i in 0..d {
                let vi = v.get(i, k - 1);
                if vi != T::zero() {
                    ops.control[i].mul_vec_transpose(p.level(k), &mut tmp);
                    scalar::axpy(-dt * theta * vi, &tmp, g);
                }
                if k < nt && theta != T::one() {
                    let vn = v.get(i, k);
                    if vn != T::zero() {
                        ops.control[i].mul_vec_transpose(p.level(k + 1), &mut tmp);
                        scalar::axpy(-dt * (T::one() - theta) * vn, &tmp, g);
                    }
                }
            }
        })?;
        let from_q = self.drift_pairings(&q, &self.rho);
        let from_z = self.drift_pairings(p, &z);
        let two = T::lit(2.0);
        let vals = (0..d * nt)
            .map(|j| {
                let (s, i) = (j / d, j % d);
                -from_q[j] - from_z[j] + two * pb.gamma[i] * v.get(i, s)
            })
            .collect();
        ControlTrajectory::from_values(d, dt, vals)
    }
}
