//! Box-constrained minimization of the reduced cost and optimality
//! diagnostics.
//!
//! All norms and inner products on controls are the discrete L²(0,T) ones,
//! matching the representation `F'(u)v = ⟨Φ, v⟩`.

mod kkt;
mod pgd;
mod pncg;
mod sonc;

pub use kkt::{classify, kkt_report, Activity, KktReport};
pub use pgd::solve_pgd;
pub use pncg::solve_pncg;
pub use sonc::{quadratic_growth, sonc_probe, GrowthReport, SoncReport, GROWTH_SLACK};

use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::scalar::Scalar;
use crate::trajectory::ControlTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ProjectedGradient,
    ProjectedNewtonCg,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" | "projected_gradient" => Ok(Method::ProjectedGradient),
            "pncg" | "projected_newton_cg" => Ok(Method::ProjectedNewtonCg),
            other => Err(Error::Spec(format!("unknown optimizer method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T> {
    pub method: Method,
    pub max_iters: usize,
    /// Stop when `‖u − P(u − Φ(u))‖ ≤ tol_pg`.
    pub tol_pg: T,
    pub armijo_c: T,
    pub backtrack: T,
    /// Trial step of the first iteration (and whenever the spectral step is
    /// unavailable).
    pub step0: T,
    /// Use the Barzilai–Borwein step as the Armijo trial step after the
    /// first iteration.
    pub spectral_step: bool,
    pub max_backtracks: usize,
    /// Activity tolerance, relative to the bound range `u_max − u_min`.
    pub active_tol: T,
    /// `|Φ|` above which a critical-cone direction is forced to zero.
    pub critical_tol: T,
    pub cg_max: usize,
    /// Relative residual tolerance of the inner CG solve.
    pub cg_tol: T,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::ProjectedGradient,
            max_iters: 500,
            tol_pg: T::lit(1e-8),
            armijo_c: T::lit(1e-4),
            backtrack: T::lit(0.5),
            step0: T::one(),
            spectral_step: true,
            max_backtracks: 60,
            active_tol: T::lit(1e-8),
            critical_tol: T::lit(1e-6),
            cg_max: 100,
            cg_tol: T::lit(1e-10),
        }
    }
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: T| v > T::zero() && v < T::one();
        if !open_unit(self.armijo_c) {
            return Err(Error::Spec("armijo_c must lie in (0, 1)".into()));
        }
        if !open_unit(self.backtrack) {
            return Err(Error::Spec("backtrack must lie in (0, 1)".into()));
        }
        for (name, v) in [
            ("tol_pg", self.tol_pg),
            ("step0", self.step0),
            ("active_tol", self.active_tol),
            ("critical_tol", self.critical_tol),
            ("cg_tol", self.cg_tol),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::Spec(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Backtracking exhausted without sufficient decrease (usually at the
    /// limit of floating-point resolution).
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub value: T,
    pub pg_norm: T,
    /// Accepted step length leading to this iterate (zero for the start).
    pub step: T,
}

#[derive(Debug, Clone)]
pub struct OptimizerReport<T> {
    pub method: Method,
    pub history: Vec<IterationRecord<T>>,
    pub u: ControlTrajectory<T>,
    pub value: T,
    pub gradient: ControlTrajectory<T>,
    pub kkt: KktReport<T>,
    pub stop: StopReason,
    /// Accepted steps (outer iterations).
    pub iterations: usize,
}

pub fn solve<T: Scalar>(
    problem: &Problem<T>,
    u0: &ControlTrajectory<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizerReport<T>> {
    match config.method {
        Method::ProjectedGradient => solve_pgd(problem, u0, config),
        Method::ProjectedNewtonCg => solve_pncg(problem, u0, config),
    }
}

/// Componentwise clamp to `[u_min, u_max]`.
pub fn project<T: Scalar>(
    u: &ControlTrajectory<T>,
    u_min: &ControlTrajectory<T>,
    u_max: &ControlTrajectory<T>,
) -> ControlTrajectory<T> {
    let mut out = u.clone();
    for ((v, &lo), &hi) in out
        .as_mut_slice()
        .iter_mut()
        .zip(u_min.as_slice())
        .zip(u_max.as_slice())
    {
        *v = v.max(lo).min(hi);
    }
    out
}

/// `‖u − P(u − Φ)‖`.
pub fn projected_gradient_norm<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
    phi: &ControlTrajectory<T>,
) -> T {
    let moved = project(
        &u.add_scaled(-T::one(), phi),
        &problem.u_min,
        &problem.u_max,
    );
    u.add_scaled(-T::one(), &moved).norm()
}

pub(crate) fn non_finite<T: Scalar>(iter: usize, u: &ControlTrajectory<T>) -> Error {
    Error::NonFiniteIterate {
        iter,
        dump: u.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
    }
}

/// `F(u)`, mapping a blown-up state to `+∞` so line searches back off.
pub(crate) fn trial_value<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlTrajectory<T>,
) -> Result<Option<(T, crate::trajectory::StateTrajectory<T>)>> {
    match problem.evaluate(u) {
        Ok((v, rho)) if v.is_finite() => Ok(Some((v, rho))),
        Ok(_) | Err(Error::NonFiniteState { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}
