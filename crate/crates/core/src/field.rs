//! Coefficient and data fields: closed-form expressions or sampled tables.

use crate::error::{Error, Result};
use crate::expr::{Expr, Point};
use crate::grid::Grid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum Field<T> {
    Expr(Expr),
    /// Pre-sampled values; the expected length depends on where the field
    /// is sampled (cells, faces, cells x time levels, control steps).
    Table(Vec<T>),
}

impl<T: Scalar> Field<T> {
    pub fn constant(c: f64) -> Self {
        Field::Expr(Expr::constant(c))
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Field::Expr(Expr::parse(src)?))
    }

    fn table(&self, what: &'static str, expected: usize) -> Option<Result<Vec<T>>> {
        match self {
            Field::Table(v) if v.len() != expected => Some(Err(Error::Shape {
                what,
                expected,
                got: v.len(),
            })),
            Field::Table(v) => Some(Ok(v.clone())),
            Field::Expr(_) => None,
        }
    }

    fn eval(&self, at: Point<T>) -> T {
        match self {
            Field::Expr(e) => e.eval(&at),
            Field::Table(_) => unreachable!("tables are handled before evaluation"),
        }
    }

    /// Values at cell centers.
    pub fn sample_cells(&self, grid: &Grid<T>) -> Result<Vec<T>> {
        let out = match self.table("cell table", grid.n_cells()) {
            Some(t) => t?,
            None => grid
                .cell_centers()
                .into_iter()
                .map(|[x, y]| self.eval(Point::new(x, y, T::zero())))
                .collect(),
        };
        check_finite(&out, "cell field")?;
        Ok(out)
    }

    /// Values at the centers of all faces normal to `axis`.
    pub fn sample_faces(&self, grid: &Grid<T>, axis: usize) -> Result<Vec<T>> {
        let out = match self.table("face table", grid.n_faces(axis)) {
            Some(t) => t?,
            None => grid
                .faces(axis)
                .into_iter()
                .map(|f| self.eval(Point::new(f.center[0], f.center[1], T::zero())))
                .collect(),
        };
        check_finite(&out, "face field")?;
        Ok(out)
    }

    /// Cell-center values at each time level `t_k = k dt`, `k = 0..=nt`,
    /// flattened level-major.
    pub fn sample_space_time(&self, grid: &Grid<T>, nt: usize, dt: T) -> Result<Vec<T>> {
        let n = grid.n_cells();
        let out = match self.table("space-time table", n * (nt + 1)) {
            Some(t) => t?,
            None => {
                let centers = grid.cell_centers();
                let mut v = Vec::with_capacity(n * (nt + 1));
                for k in 0..=nt {
                    let t = T::from_usize(k).unwrap() * dt;
                    v.extend(centers.iter().map(|&[x, y]| self.eval(Point::new(x, y, t))));
                }
                v
            }
        };
        check_finite(&out, "space-time field")?;
        Ok(out)
    }

    /// Values at the right endpoints `t_k`, `k = 1..=nt`, of the control
    /// intervals.
    pub fn sample_steps(&self, nt: usize, dt: T) -> Result<Vec<T>> {
        let out = match self.table("time table", nt) {
            Some(t) => t?,
            None => (1..=nt)
                .map(|k| {
                    let t = T::from_usize(k).unwrap() * dt;
                    self.eval(Point::new(T::zero(), T::zero(), t))
                })
                .collect(),
        };
        check_finite(&out, "time field")?;
        Ok(out)
    }
}

pub(crate) fn check_finite<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} (entry {i})"))),
        None => Ok(()),
    }
}
