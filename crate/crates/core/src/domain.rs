//! Problem data, finite-volume assembly of the bilinear form, and checks of
//! the standing assumptions on the data.

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::field::{check_finite, Field};
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::sparse::{Pattern, SparseMatrix};

/// Mass defect below which the initial density is silently rescaled.
pub const MASS_RENORMALIZE_TOL: f64 = 1e-6;
/// Boundary normal-trace tolerance for `b·n` and `c·n`.
pub const BOUNDARY_TRACE_TOL: f64 = 1e-12;

/// Continuous problem data.
///
/// The control has one component per spatial axis,
/// `B[u](x) = c(x) + b(x) ⊗ u` acting componentwise.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T> {
    pub nu: T,
    pub extent: Vec<T>,
    pub final_time: T,
    /// Drift `c`, one field per axis, sampled on faces.
    pub drift: Vec<Field<T>>,
    /// Control channel `b`, one field per axis, sampled on faces.
    pub control_field: Vec<Field<T>>,
    pub rho0: Field<T>,
    /// Running target, sampled at every time level.
    pub rho_q: Field<T>,
    pub rho_omega: Field<T>,
    pub alpha_q: T,
    pub alpha_omega: T,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    /// Per-component bounds, sampled at the control steps.
    pub u_min: Vec<Field<T>>,
    pub u_max: Vec<Field<T>>,
}

impl<T: Scalar> ProblemSpec<T> {
    /// Pure diffusion on `[0, L]^d` with zero targets and weights, `γ = 1`,
    /// bounds `[-1, 1]`; a starting point for building scenarios.
    pub fn diffusion(nu: T, extent: &[T], final_time: T) -> Self {
        let d = extent.len();
        let vol = extent.iter().fold(T::one(), |a, &l| a * l);
        Self {
            nu,
            extent: extent.to_vec(),
            final_time,
            drift: vec![Field::constant(0.0); d],
            control_field: vec![Field::constant(0.0); d],
            rho0: Field::constant((T::one() / vol).to_f64_lossy()),
            rho_q: Field::constant(0.0),
            rho_omega: Field::constant(0.0),
            alpha_q: T::zero(),
            alpha_omega: T::zero(),
            gamma: vec![T::one(); d],
            beta: vec![T::zero(); d],
            u_min: vec![Field::constant(-1.0); d],
            u_max: vec![Field::constant(1.0); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    /// Structural checks that do not need a grid.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > 2 {
            return Err(Error::Spec(format!("dimension must be 1 or 2, got {d}")));
        }
        if !(self.nu.is_finite() && self.nu > T::zero()) {
            return Err(Error::Spec("nu must be positive".into()));
        }
        if !(self.final_time.is_finite() && self.final_time > T::zero()) {
            return Err(Error::Spec("final time must be positive".into()));
        }
        let lens: [(&'static str, usize); 6] = [
            ("drift components", self.drift.len()),
            ("control field components", self.control_field.len()),
            ("gamma", self.gamma.len()),
            ("beta", self.beta.len()),
            ("u_min components", self.u_min.len()),
            ("u_max components", self.u_max.len()),
        ];
        for (what, got) in lens {
            if got != d {
                return Err(Error::Shape {
                    what,
                    expected: d,
                    got,
                });
            }
        }
        for (name, v) in [("alpha_q", self.alpha_q), ("alpha_omega", self.alpha_omega)] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::Spec(format!(
                    "{name} must be finite and nonnegative"
                )));
            }
        }
        if self
            .gamma
            .iter()
            .any(|g| !(g.is_finite() && *g >= T::zero()))
        {
            return Err(Error::Spec("gamma must be finite and nonnegative".into()));
        }
        check_finite(&self.beta, "beta")?;
        Ok(())
    }
}

/// Uniform time grid `t_k = k·dt`, `k = 0..=nt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub nt: usize,
    pub dt: T,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(final_time: T, nt: usize) -> Result<Self> {
        if nt == 0 {
            return Err(Error::Spec("need at least one time step".into()));
        }
        Ok(Self {
            nt,
            dt: final_time / T::from_usize(nt).unwrap(),
        })
    }

    pub fn time(&self, k: usize) -> T {
        T::from_usize(k).unwrap() * self.dt
    }
}

/// Face flux for the drift terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxScheme {
    /// Face-averaged density (second order).
    #[default]
    Central,
    /// Upwinded by the largest admissible face velocity (first order,
    /// M-matrix for every control within bounds).
    Upwind,
}

impl std::str::FromStr for FluxScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(FluxScheme::Central),
            "upwind" => Ok(FluxScheme::Upwind),
            other => Err(Error::Spec(format!("unknown flux scheme {other:?}"))),
        }
    }
}

/// Affine decomposition `A(u) = A_diff + D_c + Σ_i u_i D_{b,i}` of the
/// discrete bilinear form, plus the diagonal mass matrix.
///
/// The semi-discrete state equation reads `M ρ' + A(u) ρ = 0`; every
/// operator has zero column sums so `𝟙ᵀ A(u) = 0`.
#[derive(Debug, Clone)]
pub struct DiscreteOperators<T> {
    pub mass: Vec<T>,
    pub diffusion: SparseMatrix<T>,
    pub drift: SparseMatrix<T>,
    pub control: Vec<SparseMatrix<T>>,
    pub scheme: FluxScheme,
}

impl<T: Scalar> DiscreteOperators<T> {
    pub fn n_cells(&self) -> usize {
        self.mass.len()
    }

    pub fn n_controls(&self) -> usize {
        self.control.len()
    }

    /// `A(u)` for one control value.
    pub fn operator(&self, u: &[T]) -> SparseMatrix<T> {
        assert_eq!(u.len(), self.control.len(), "control dimension");
        let mut terms = vec![(T::one(), &self.diffusion), (T::one(), &self.drift)];
        terms.extend(u.iter().copied().zip(self.control.iter()));
        SparseMatrix::linear_combination(&terms)
    }
}

fn stencil_pattern<T: Scalar>(grid: &Grid<T>) -> Pattern {
    let n = grid.n_cells();
    let mut rows: Vec<Vec<usize>> = (0..n).map(|c| vec![c]).collect();
    for axis in 0..grid.dim() {
        for f in grid.faces(axis) {
            if let (Some(l), Some(h)) = (f.low, f.high) {
                rows[l].push(h);
                rows[h].push(l);
            }
        }
    }
    Pattern::from_rows(rows)
}

/// Adds the face flux `F = kl·ρ_low + kh·ρ_high` of `ν∇ρ + ρB` (normal
/// pointing from low to high) to `A`.
///
/// With `M ρ' + A ρ = 0` the low cell gains `area·F` and the high cell
/// loses it: the low row receives `-area·(kl, kh)` and the high row
/// `+area·(kl, kh)`, so every column sum is unchanged.
fn add_face_flux<T: Scalar>(
    a: &mut SparseMatrix<T>,
    low: usize,
    high: usize,
    area: T,
    kl: T,
    kh: T,
) {
    a.add(low, low, -area * kl);
    a.add(low, high, -area * kh);
    a.add(high, low, area * kl);
    a.add(high, high, area * kh);
}

/// Envelope `[min_k u_min(k), max_k u_max(k)]` per control component.
pub fn control_envelope<T: Scalar>(u_min: &[Vec<T>], u_max: &[Vec<T>]) -> Vec<(T, T)> {
    u_min
        .iter()
        .zip(u_max)
        .map(|(lo, hi)| {
            let a = lo.iter().copied().fold(T::infinity(), T::min);
            let b = hi.iter().copied().fold(T::neg_infinity(), T::max);
            (a, b)
        })
        .collect()
}

/// Assembles the finite-volume operators.
///
/// Diffusion flux across a face is `ν (ρ_high − ρ_low)/h`; the drift flux is
/// `B_f ρ_f` with `ρ_f` the face average (central) or, for upwind, the
/// local Lax–Friedrichs flux `B_f ρ_avg + (λ_f/2)(ρ_high − ρ_low)` with `λ_f`
/// the largest `|c_f + b_f u|` over the control envelope. The upwind
/// dissipation is control independent, so `A(u)` stays affine in `u`.
/// Boundary faces carry no flux.
pub fn assemble<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
    envelope: &[(T, T)],
    scheme: FluxScheme,
) -> Result<DiscreteOperators<T>> {
    spec.validate()?;
    if grid.dim() != spec.dim() {
        return Err(Error::Shape {
            what: "grid dimension",
            expected: spec.dim(),
            got: grid.dim(),
        });
    }
    for (axis, (&l, &gl)) in spec.extent.iter().zip(grid.extent()).enumerate() {
        if (l - gl).abs() > T::epsilon() * T::lit(16.0) * l {
            return Err(Error::Grid(format!(
                "axis {axis}: grid extent differs from problem extent"
            )));
        }
    }
    if envelope.len() != spec.dim() {
        return Err(Error::Shape {
            what: "control envelope",
            expected: spec.dim(),
            got: envelope.len(),
        });
    }
    let pattern = Arc::new(stencil_pattern(grid));
    let mut diffusion = SparseMatrix::zeros(pattern.clone());
    let mut drift = SparseMatrix::zeros(pattern.clone());
    let mut control = Vec::with_capacity(spec.dim());
    let half = T::lit(0.5);

    #[allow(clippy::needless_range_loop)]
    for axis in 0..grid.dim() {
        let h = grid.cell_width()[axis];
        let c = spec.drift[axis].sample_faces(grid, axis)?;
        let b = spec.control_field[axis].sample_faces(grid, axis)?;
        let (umin, umax) = envelope[axis];
        let mut d_b = SparseMatrix::zeros(pattern.clone());
        for (f, face) in grid.faces(axis).iter().enumerate() {
            let (Some(low), Some(high)) = (face.low, face.high) else {
                continue;
            };
            let k = spec.nu / h;
            add_face_flux(&mut diffusion, low, high, face.area, -k, k);
            add_face_flux(&mut drift, low, high, face.area, half * c[f], half * c[f]);
            add_face_flux(&mut d_b, low, high, face.area, half * b[f], half * b[f]);
            if scheme == FluxScheme::Upwind {
                let lambda = (c[f] + b[f] * umin).abs().max((c[f] + b[f] * umax).abs());
                let kappa = half * lambda;
                add_face_flux(&mut drift, low, high, face.area, -kappa, kappa);
            }
        }
        control.push(d_b);
    }

    let vol = grid.cell_volume();
    Ok(DiscreteOperators {
        mass: vec![vol; grid.n_cells()],
        diffusion,
        drift,
        control,
        scheme,
    })
}

/// Outcome of the assumption checks; only the mass check is binding.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport<T> {
    /// Initial density after normalization to unit mass.
    pub rho0: Vec<T>,
    pub mass_before: T,
    pub renormalized: bool,
    /// `max |b·n|` over boundary faces; `b·n = 0` is required of the
    /// control channel.
    pub control_boundary_violation: T,
    pub control_boundary_ok: bool,
    /// `max |c·n|` over boundary faces (needed for higher regularity only).
    pub drift_boundary_violation: T,
    pub drift_boundary_ok: bool,
    /// `min γ_i > 0`; `None` when second-order diagnostics were not requested.
    pub gamma_positive: Option<bool>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> AssumptionReport<T> {
    /// True when all advisory flags pass as well.
    pub fn all_ok(&self) -> bool {
        self.control_boundary_ok && self.drift_boundary_ok && self.gamma_positive.unwrap_or(true)
    }
}

fn boundary_trace<T: Scalar>(fields: &[Field<T>], grid: &Grid<T>) -> Result<T> {
    let mut worst = T::zero();
    for (axis, field) in fields.iter().enumerate() {
        let vals = field.sample_faces(grid, axis)?;
        for (face, v) in grid.faces(axis).iter().zip(vals) {
            if face.is_boundary() {
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Checks the data against the standing assumptions.
///
/// Hard errors: negative initial density below `-1e-12·max ρ₀`, mass off
/// from one by `MASS_RENORMALIZE_TOL` or more, non-finite data. Smaller
/// mass defects are corrected by rescaling, with a warning.
pub fn validate_assumptions<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
    second_order: bool,
) -> Result<AssumptionReport<T>> {
    spec.validate()?;
    let mut warnings = Vec::new();
    let mut rho0 = spec.rho0.sample_cells(grid)?;
    let max = rho0.iter().copied().fold(T::zero(), T::max);
    let min = rho0.iter().copied().fold(T::infinity(), T::min);
    if min < -T::lit(1e-12) * max {
        return Err(Error::NegativeDensity {
            min: min.to_f64_lossy(),
        });
    }
    for r in rho0.iter_mut() {
        *r = r.max(T::zero());
    }
    let vol = grid.cell_volume();
    let mass_before = rho0.iter().fold(T::zero(), |a, &r| a + r) * vol;
    let defect = (mass_before - T::one()).abs();
    if defect >= T::lit(MASS_RENORMALIZE_TOL) {
        return Err(Error::MassMismatch {
            mass: mass_before.to_f64_lossy(),
            tol: MASS_RENORMALIZE_TOL,
        });
    }
    let renormalized = defect > T::zero();
    if renormalized {
        for r in rho0.iter_mut() {
            *r = *r / mass_before;
        }
        let msg = format!("initial density mass {mass_before:e} renormalized to 1");
        warn!("{msg}");
        warnings.push(msg);
    }

    let tol = T::lit(BOUNDARY_TRACE_TOL);
    let bv = boundary_trace(&spec.control_field, grid)?;
    let cv = boundary_trace(&spec.drift, grid)?;
    if bv > tol {
        warnings.push(format!(
            "control field b·n = {bv:e} on the boundary (should vanish)"
        ));
    }
    if cv > tol {
        warnings.push(format!("drift c·n = {cv:e} on the boundary"));
    }
    let gamma_positive = second_order.then(|| {
        let min_gamma = spec.gamma.iter().copied().fold(T::infinity(), T::min);
        min_gamma > T::zero()
    });
    if gamma_positive == Some(false) {
        warnings.push("min gamma is zero; second-order diagnostics lose coercivity".into());
    }

    Ok(AssumptionReport {
        rho0,
        mass_before,
        renormalized,
        control_boundary_violation: bv,
        control_boundary_ok: bv <= tol,
        drift_boundary_violation: cv,
        drift_boundary_ok: cv <= tol,
        gamma_positive,
        warnings,
    })
}
