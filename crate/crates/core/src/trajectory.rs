use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Piecewise-constant control: `n_controls` components on `nt` steps.
///
/// Step `s` (0-based) holds the value on `(t_s, t_{s+1}]`. Storage is
/// step-major so `step(s)` is the control vector of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory<T> {
    values: Vec<T>,
    n_controls: usize,
    dt: T,
}

/// The gradient `Φ` shares the control layout; it is the discrete
/// L²(0,T) representative, so `F'(u)v = ⟨Φ, v⟩`.
pub type GradientTrajectory<T> = ControlTrajectory<T>;

impl<T: Scalar> ControlTrajectory<T> {
    pub fn zeros(n_controls: usize, nt: usize, dt: T) -> Self {
        Self::constant(n_controls, nt, dt, T::zero())
    }

    pub fn constant(n_controls: usize, nt: usize, dt: T, value: T) -> Self {
        Self {
            values: vec![value; n_controls * nt],
            n_controls,
            dt,
        }
    }

    pub fn from_values(n_controls: usize, dt: T, values: Vec<T>) -> Result<Self> {
        if n_controls == 0 || values.is_empty() || !values.len().is_multiple_of(n_controls) {
            return Err(Error::Shape {
                what: "control values",
                expected: n_controls.max(1) * (values.len() / n_controls.max(1)).max(1),
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            n_controls,
            dt,
        })
    }

    /// Builds from per-component sequences of equal length.
    pub fn from_components(components: &[Vec<T>], dt: T) -> Result<Self> {
        let d = components.len();
        let nt = components.first().map_or(0, Vec::len);
        if d == 0 || nt == 0 {
            return Err(Error::Spec("empty control".into()));
        }
        let mut values = vec![T::zero(); d * nt];
        for (i, c) in components.iter().enumerate() {
            if c.len() != nt {
                return Err(Error::Shape {
                    what: "control component length",
                    expected: nt,
                    got: c.len(),
                });
            }
            for (s, &v) in c.iter().enumerate() {
                values[s * d + i] = v;
            }
        }
        Ok(Self {
            values,
            n_controls: d,
            dt,
        })
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn nt(&self) -> usize {
        self.values.len() / self.n_controls
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn step(&self, s: usize) -> &[T] {
        &self.values[s * self.n_controls..(s + 1) * self.n_controls]
    }

    pub fn get(&self, i: usize, s: usize) -> T {
        self.values[s * self.n_controls + i]
    }

    pub fn set(&mut self, i: usize, s: usize, v: T) {
        self.values[s * self.n_controls + i] = v;
    }

    pub fn component(&self, i: usize) -> Vec<T> {
        (0..self.nt()).map(|s| self.get(i, s)).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_controls == other.n_controls && self.values.len() == other.values.len()
    }

    pub(crate) fn check_shape(&self, other: &Self, what: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape {
                what,
                expected: self.values.len(),
                got: other.values.len(),
            })
        }
    }

    /// Discrete L²(0,T) inner product `Σ_s dt Σ_i a_i^s b_i^s`.
    pub fn dot(&self, other: &Self) -> T {
        self.dt * scalar::dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        let mut out = self.clone();
        scalar::axpy(alpha, &other.values, &mut out.values);
        out
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            n_controls: self.n_controls,
            dt: self.dt,
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        debug_assert!(self.same_shape(other));
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            n_controls: self.n_controls,
            dt: self.dt,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Density,
    Linearized,
    Adjoint,
}

/// Grid function at every time level `k = 0..=nt` (level 0 is the initial
/// datum for densities).
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<T> {
    values: Vec<T>,
    n_cells: usize,
    dt: T,
    role: Role,
}

impl<T: Scalar> StateTrajectory<T> {
    pub fn zeros(n_cells: usize, nt: usize, dt: T, role: Role) -> Self {
        Self {
            values: vec![T::zero(); n_cells * (nt + 1)],
            n_cells,
            dt,
            role,
        }
    }

    pub fn from_values(n_cells: usize, dt: T, role: Role, values: Vec<T>) -> Result<Self> {
        if n_cells == 0 || !values.len().is_multiple_of(n_cells) || values.len() < 2 * n_cells {
            return Err(Error::Shape {
                what: "state trajectory values",
                expected: n_cells * 2,
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            n_cells,
            dt,
            role,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn nt(&self) -> usize {
        self.values.len() / self.n_cells - 1
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn level(&self, k: usize) -> &[T] {
        &self.values[k * self.n_cells..(k + 1) * self.n_cells]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.values[k * self.n_cells..(k + 1) * self.n_cells]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}
