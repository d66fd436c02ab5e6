use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform tensor grid of cells on `[0, L_0] (x [0, L_1])`.
///
/// Cells are numbered lexicographically with the first axis fastest:
/// `index = i0 + N0 * i1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    extent: Vec<T>,
    cells: Vec<usize>,
    width: Vec<T>,
}

/// Interior or boundary face between two cells along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face<T> {
    pub axis: usize,
    /// Cell on the low side, `None` on the `x_axis = 0` boundary.
    pub low: Option<usize>,
    /// Cell on the high side, `None` on the `x_axis = L` boundary.
    pub high: Option<usize>,
    pub center: [T; 2],
    pub area: T,
}

impl<T> Face<T> {
    pub fn is_boundary(&self) -> bool {
        self.low.is_none() || self.high.is_none()
    }
}

impl<T: Scalar> Grid<T> {
    pub fn new(extent: &[T], cells: &[usize]) -> Result<Self> {
        if extent.is_empty() || extent.len() > 2 {
            return Err(Error::Grid(format!(
                "dimension must be 1 or 2, got {}",
                extent.len()
            )));
        }
        if extent.len() != cells.len() {
            return Err(Error::Shape {
                what: "cells per axis",
                expected: extent.len(),
                got: cells.len(),
            });
        }
        for (axis, (&l, &n)) in extent.iter().zip(cells).enumerate() {
            if n < 2 {
                return Err(Error::Grid(format!(
                    "axis {axis}: need at least 2 cells, got {n}"
                )));
            }
            if !(l.is_finite() && l > T::zero()) {
                return Err(Error::Grid(format!(
                    "axis {axis}: extent must be positive and finite"
                )));
            }
        }
        let width = extent
            .iter()
            .zip(cells)
            .map(|(&l, &n)| l / T::from_usize(n).unwrap())
            .collect();
        Ok(Self {
            extent: extent.to_vec(),
            cells: cells.to_vec(),
            width,
        })
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn extent(&self) -> &[T] {
        &self.extent
    }

    pub fn cell_width(&self) -> &[T] {
        &self.width
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> T {
        self.width.iter().fold(T::one(), |a, &h| a * h)
    }

    pub fn total_volume(&self) -> T {
        self.extent.iter().fold(T::one(), |a, &l| a * l)
    }

    /// Index stride between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.cells[..axis].iter().product()
    }

    /// Multi-index `(i0, i1)` of a cell; `i1 = 0` in 1D.
    pub fn multi_index(&self, cell: usize) -> [usize; 2] {
        let n0 = self.cells[0];
        [cell % n0, cell / n0]
    }

    fn axis_center(&self, axis: usize, i: usize) -> T {
        (T::from_usize(i).unwrap() + T::lit(0.5)) * self.width[axis]
    }

    /// Cell center; the second coordinate is zero in 1D.
    pub fn cell_center(&self, cell: usize) -> [T; 2] {
        let [i0, i1] = self.multi_index(cell);
        let x = self.axis_center(0, i0);
        let y = if self.dim() > 1 {
            self.axis_center(1, i1)
        } else {
            T::zero()
        };
        [x, y]
    }

    pub fn cell_centers(&self) -> Vec<[T; 2]> {
        (0..self.n_cells()).map(|c| self.cell_center(c)).collect()
    }

    /// Number of faces normal to `axis`, boundary faces included.
    pub fn n_faces(&self, axis: usize) -> usize {
        self.cells
            .iter()
            .enumerate()
            .map(|(a, &n)| if a == axis { n + 1 } else { n })
            .product()
    }

    /// All faces normal to `axis`, ordered lexicographically with the face
    /// position along `axis` running over `0..=N_axis`.
    pub fn faces(&self, axis: usize) -> Vec<Face<T>> {
        let d = self.dim();
        let mut shape = self.cells.clone();
        shape[axis] += 1;
        let stride = self.stride(axis);
        let n_axis = self.cells[axis];
        let area = self.cell_volume() / self.width[axis];
        let mut out = Vec::with_capacity(self.n_faces(axis));
        let (outer, inner) = if d == 1 {
            (1, shape[0])
        } else {
            (shape[1], shape[0])
        };
        for j in 0..outer {
            for i in 0..inner {
                let idx = [i, j];
                let pos = idx[axis];
                let mut cell_idx = idx;
                let center = {
                    let mut c = [T::zero(); 2];
                    for a in 0..d {
                        c[a] = if a == axis {
                            T::from_usize(pos).unwrap() * self.width[a]
                        } else {
                            self.axis_center(a, idx[a])
                        };
                    }
                    c
                };
                let high = if pos < n_axis {
                    cell_idx[axis] = pos;
                    Some(cell_idx[0] + self.cells[0] * cell_idx[1])
                } else {
                    None
                };
                let low = if pos > 0 {
                    cell_idx[axis] = pos - 1;
                    Some(cell_idx[0] + self.cells[0] * cell_idx[1])
                } else {
                    None
                };
                if let (Some(l), Some(h)) = (low, high) {
                    debug_assert_eq!(h, l + stride);
                }
                out.push(Face {
                    axis,
                    low,
                    high,
                    center,
                    area,
                });
            }
        }
        out
    }
}
