//! Optimal control of the Fokker-Planck equation
//!
//! ```text
//! ∂_t ρ − ν Δρ − div(ρ B[u]) = 0,   B[u](x) = c(x) + b(x) ⊗ u(t),
//! (ν∇ρ + ρ B[u])·n = 0 on the boundary,
//! ```
//!
//! with time-dependent box-constrained controls. The crate provides a
//! conservative finite-volume discretization, θ-scheme time stepping,
//! the exact discrete adjoint gradient and Hessian action, projected
//! gradient and projected Newton-CG solvers, and first/second-order
//! optimality diagnostics.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod adjoint;
pub mod check;
pub mod domain;
pub mod error;
pub mod expr;
pub mod field;
pub mod forward;
pub mod grid;
pub mod objective;
pub mod optimizer;
pub mod scalar;
pub mod scenario;
pub mod sparse;
pub mod trajectory;

pub use adjoint::solve_adjoint;
pub use domain::{assemble, validate_assumptions, FluxScheme};
pub use error::{Error, ErrorKind, Result};
pub use expr::Expr;
pub use forward::{mass, solve_forward, solve_linearized};
pub use optimizer::{project, Method, StopReason};
pub use scalar::Scalar;
pub use trajectory::Role;

pub type ProblemSpec = domain::ProblemSpec<f64>;
pub type Grid = grid::Grid<f64>;
pub type TimeGrid = domain::TimeGrid<f64>;
pub type Field = field::Field<f64>;
pub type DiscreteOperators = domain::DiscreteOperators<f64>;
pub type AssumptionReport = domain::AssumptionReport<f64>;
pub type ControlTrajectory = trajectory::ControlTrajectory<f64>;
pub type GradientTrajectory = trajectory::GradientTrajectory<f64>;
pub type StateTrajectory = trajectory::StateTrajectory<f64>;
pub type Discretization = objective::Discretization<f64>;
pub type Problem = objective::Problem<f64>;
pub type OptimizerConfig = optimizer::OptimizerConfig<f64>;
pub type OptimizerReport = optimizer::OptimizerReport<f64>;
pub type KktReport = optimizer::KktReport<f64>;
pub type SoncReport = optimizer::SoncReport<f64>;
pub type GrowthReport = optimizer::GrowthReport<f64>;
