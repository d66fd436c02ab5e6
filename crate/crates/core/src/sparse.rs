//! Compressed-row matrices sharing one stencil pattern, and a banded LU.

#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use crate::scalar::Scalar;

/// Sparsity pattern in CSR form, column indices sorted within each row.
#[derive(Debug, PartialEq, Eq)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (sorted and deduplicated here).
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.iter().all(|&c| c < n));
            col.extend(r);
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|p| range.start + p)
    }

    /// `(kl, ku)`: the largest distance below and above the diagonal.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n {
            for &c in &self.col[self.row_ptr[r]..self.row_ptr[r + 1]] {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    pattern: Arc<Pattern>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Adds `v` to entry `(row, col)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: T) {
        let p = self
            .pattern
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) not in pattern"));
        self.values[p] = self.values[p] + v;
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.pattern
            .position(row, col)
            .map_or(T::zero(), |p| self.values[p])
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let p = &self.pattern;
        (0..p.n).flat_map(move |r| {
            (p.row_ptr[r]..p.row_ptr[r + 1]).map(move |k| (r, p.col[k], self.values[k]))
        })
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        let p = &self.pattern;
        for r in 0..p.n {
            let mut acc = T::zero();
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                acc = acc + self.values[k] * x[p.col[k]];
            }
            y[r] = acc;
        }
    }

    /// `y = Aᵀ x`.
    pub fn mul_vec_transpose(&self, x: &[T], y: &mut [T]) {
        let p = &self.pattern;
        y.iter_mut().for_each(|v| *v = T::zero());
        for r in 0..p.n {
            let xr = x[r];
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                let c = p.col[k];
                y[c] = y[c] + self.values[k] * xr;
            }
        }
    }

    /// `yᵀ A x` without forming `A x`.
    pub fn bilinear(&self, y: &[T], x: &[T]) -> T {
        let p = &self.pattern;
        let mut acc = T::zero();
        for r in 0..p.n {
            let mut row = T::zero();
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                row = row + self.values[k] * x[p.col[k]];
            }
            acc = acc + y[r] * row;
        }
        acc
    }

    pub fn column_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.n()];
        for (_, c, v) in self.entries() {
            s[c] = s[c] + v;
        }
        s
    }

    /// `Σ_j coeff_j · M_j` over matrices sharing this pattern.
    pub fn linear_combination(terms: &[(T, &SparseMatrix<T>)]) -> Self {
        let first = terms.first().expect("at least one term").1;
        let mut out = Self::zeros(first.pattern.clone());
        for (coef, m) in terms {
            assert!(
                Arc::ptr_eq(&m.pattern, &out.pattern) || *m.pattern == *out.pattern,
                "linear_combination requires a shared pattern"
            );
            for (o, &v) in out.values.iter_mut().zip(&m.values) {
                *o = *o + *coef * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n()]; self.n()];
        for (r, c, v) in self.entries() {
            d[r][c] = v;
        }
        d
    }
}

/// LU factorization with partial pivoting of a banded matrix.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku` so that row swaps during
/// pivoting stay inside the band.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // caller guarantees i - kl <= j <= i + kl + ku
        i * self.width + (j + self.kl - i)
    }

    /// Factors `diag(d) + s·A`. Returns the failing column on a zero pivot.
    pub fn factor_shifted(d: &[T], s: T, a: &SparseMatrix<T>) -> Result<Self, usize> {
        let n = a.n();
        let (kl, ku) = a.pattern().bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
            piv: vec![0; n],
        };
        for (r, c, v) in a.entries() {
            let k = lu.idx(r, c);
            lu.data[k] = lu.data[k] + s * v;
        }
        for (i, &di) in d.iter().enumerate() {
            let k = lu.idx(i, i);
            lu.data[k] = lu.data[k] + di;
        }
        lu.factorize()?;
        Ok(lu)
    }

    fn factorize(&mut self) -> Result<(), usize> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            // strict comparison keeps the diagonal on ties
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(k);
            }
            self.piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != T::zero() {
                    for j in k + 1..=last_col {
                        let ij = self.idx(i, j);
                        let kj = self.idx(k, j);
                        self.data[ij] = self.data[ij] - l * self.data[kj];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != T::zero() {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] = b[i] - self.data[self.idx(i, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc = acc - self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
    }

    /// Solves `Aᵀ x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let reach = self.kl + self.ku;
        // Uᵀ w = b
        for i in 0..n {
            let mut acc = b[i];
            for j in i.saturating_sub(reach)..i {
                acc = acc - self.data[self.idx(j, i)] * b[j];
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
        // undo the elimination steps in reverse order
        for k in (0..n).rev() {
            let mut acc = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                acc = acc - self.data[self.idx(i, k)] * b[i];
            }
            b[k] = acc;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with full pivoting; independent oracle.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut pr, mut pc, mut best) = (k, k, 0.0);
            for (i, row) in a.iter().enumerate().skip(k) {
                for (j, v) in row.iter().enumerate().skip(k) {
                    if v.abs() > best {
                        best = v.abs();
                        pr = i;
                        pc = j;
                    }
                }
            }
            a.swap(k, pr);
            b.swap(k, pr);
            for row in a.iter_mut() {
                row.swap(k, pc);
            }
            perm.swap(k, pc);
            for i in k + 1..n {
                let l = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= l * a[k][j];
                }
                b[i] -= l * b[k];
            }
        }
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * y[j]).sum();
            y[i] = (b[i] - s) / a[i][i];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    fn random_banded(n: usize, stride: usize, rng: &mut ChaCha8Rng) -> SparseMatrix<f64> {
        let rows = (0..n)
            .map(|r| {
                let mut c = vec![r];
                if r >= 1 {
                    c.push(r - 1);
                }
                if r + 1 < n {
                    c.push(r + 1);
                }
                if r >= stride {
                    c.push(r - stride);
                }
                if r + stride < n {
                    c.push(r + stride);
                }
                c
            })
            .collect();
        let pattern = Arc::new(Pattern::from_rows(rows));
        let mut m = SparseMatrix::zeros(pattern.clone());
        for r in 0..n {
            for c in 0..n {
                if pattern.position(r, c).is_some() {
                    m.add(r, c, rng.random_range(-1.0..1.0));
                }
            }
        }
        m
    }

    #[test]
    fn band_lu_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, stride) in &[(6usize, 1usize), (12, 3), (20, 4)] {
            let a = random_banded(n, stride, &mut rng);
            // small diagonal so pivoting actually happens
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
            let lu = BandLu::factor_shifted(&d, 1.0, &a).unwrap();
            let mut dense = a.to_dense();
            for i in 0..n {
                dense[i][i] += d[i];
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x_ref = dense_solve(dense.clone(), b.clone());
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            for (u, v) in x.iter().zip(&x_ref) {
                assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()), "{u} vs {v}");
            }
            let dense_t: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| dense[j][i]).collect())
                .collect();
            let xt_ref = dense_solve(dense_t, b.clone());
            let mut xt = b.clone();
            lu.solve_transpose_in_place(&mut xt);
            for (u, v) in xt.iter().zip(&xt_ref) {
                assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let pattern = Arc::new(Pattern::from_rows(vec![vec![0, 1], vec![0, 1]]));
        let a = SparseMatrix::<f64>::zeros(pattern);
        assert_eq!(BandLu::factor_shifted(&[0.0, 0.0], 1.0, &a).unwrap_err(), 0);
    }

    #[test]
    fn transpose_products_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_banded(9, 3, &mut rng);
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut ax = vec![0.0; 9];
        let mut aty = vec![0.0; 9];
        a.mul_vec(&x, &mut ax);
        a.mul_vec_transpose(&y, &mut aty);
        let lhs: f64 = y.iter().zip(&ax).map(|(p, q)| p * q).sum();
        let rhs: f64 = aty.iter().zip(&x).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() < 1e-14);
        assert!((a.bilinear(&y, &x) - lhs).abs() < 1e-14);
    }
}
