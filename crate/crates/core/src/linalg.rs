//! Dense complex matrices, Hermitian positive-definite factorizations and the
//! 2x2 block views used by the dual-array detectors.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hermitian inner product `a^H b`.
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(1.0, 0.0);
        }
        a
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[&[C64]]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch { expected: rows, found: c.len() });
            }
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, data })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sqr(&self.data).sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Square Hermitian matrix. Construction replaces `A` by `(A + A^H)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    inner: CMatrix,
}

impl HermitianMatrix {
    pub fn new(a: CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let n = a.rows();
        let mut inner = a;
        for i in 0..n {
            inner[(i, i)] = C64::new(inner[(i, i)].re, 0.0);
            for j in 0..i {
                let v = (inner[(i, j)] + inner[(j, i)].conj()) * 0.5;
                inner[(i, j)] = v;
                inner[(j, i)] = v.conj();
            }
        }
        Ok(HermitianMatrix { inner })
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix { inner: CMatrix::identity(n) }
    }

    /// Build from the lower triangle; the upper triangle is filled by conjugation.
    pub fn from_lower(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let v = f(i, j);
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
            a[(i, i)] = C64::new(f(i, i).re, 0.0);
        }
        HermitianMatrix { inner: a }
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix { inner: self.inner.scale(s) }
    }

    /// `D A D` for a real diagonal `D`.
    pub fn scale_diag(&self, d: &[f64]) -> Result<Self> {
        let n = self.dim();
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: d.len() });
        }
        Ok(HermitianMatrix { inner: CMatrix::from_fn(n, n, |i, j| self.inner[(i, j)] * (d[i] * d[j])) })
    }

    /// The four `m x m` blocks of a `2m x 2m` matrix.
    pub fn blocks(&self) -> Result<BlockView> {
        BlockView::split(&self.inner)
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, ij: (usize, usize)) -> &C64 {
        &self.inner[ij]
    }
}

/// The `m x m` blocks `[[b11, b12], [b21, b22]]` of a `2m x 2m` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockView {
    pub m: usize,
    pub b11: CMatrix,
    pub b12: CMatrix,
    pub b21: CMatrix,
    pub b22: CMatrix,
}

impl BlockView {
    pub fn split(a: &CMatrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || n % 2 != 0 || n == 0 {
            return Err(Error::DimensionMismatch { expected: 2 * (n / 2).max(1), found: n });
        }
        let m = n / 2;
        Ok(BlockView {
            m,
            b11: a.submatrix(0, 0, m, m),
            b12: a.submatrix(0, m, m, m),
            b21: a.submatrix(m, 0, m, m),
            b22: a.submatrix(m, m, m, m),
        })
    }

    pub fn assemble(&self) -> CMatrix {
        let m = self.m;
        CMatrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
            (true, true) => self.b11[(i, j)],
            (true, false) => self.b12[(i, j - m)],
            (false, true) => self.b21[(i - m, j)],
            (false, false) => self.b22[(i - m, j - m)],
        })
    }
}

/// Lower Cholesky factor `L` with `A = L L^H`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    n: usize,
    // row-major lower triangle, upper part zero
    l: Vec<C64>,
}

impl CholeskyFactor {
    pub fn new(a: &HermitianMatrix) -> Result<Self> {
        let n = a.dim();
        let max_diag = (0..n).map(|i| a[(i, i)].re).fold(0.0f64, f64::max);
        let floor = n as f64 * f64::EPSILON * max_diag;
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (i * n, j * n);
                let s = a[(i, j)] - dot(&l[rj..rj + j], &l[ri..ri + j]);
                if i == j {
                    let d = s.re;
                    if !(d > floor) || !d.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: d });
                    }
                    l[ri + i] = C64::new(d.sqrt(), 0.0);
                } else {
                    l[ri + j] = s / l[rj + j].re;
                }
            }
        }
        Ok(CholeskyFactor { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[C64] {
        &self.l[i * self.n..(i + 1) * self.n]
    }

    pub fn lower(&self) -> CMatrix {
        CMatrix::from_vec(self.n, self.n, self.l.clone()).expect("square")
    }

    /// `L g`.
    pub fn mul_lower(&self, g: &[C64]) -> Vec<C64> {
        assert_eq!(g.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i)[..=i].iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solve `L y = b` in place, assuming `b[..start]` is zero.
    pub fn forward_in_place_from(&self, b: &mut [C64], start: usize) {
        assert_eq!(b.len(), self.n);
        for i in start..self.n {
            let row = self.row(i);
            let mut s = b[i];
            for k in start..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i].re;
        }
    }

    /// `L^{-1} b`.
    pub fn forward(&self, b: &[C64]) -> Vec<C64> {
        let mut y = b.to_vec();
        self.forward_in_place_from(&mut y, 0);
        y
    }

    /// Solve `L^H x = y` in place.
    pub fn backward_in_place(&self, y: &mut [C64]) {
        assert_eq!(y.len(), self.n);
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let xi = y[i] / row[i].re;
            y[i] = xi;
            for k in 0..i {
                y[k] -= row[k].conj() * xi;
            }
        }
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let mut x = b.to_vec();
        self.forward_in_place_from(&mut x, 0);
        self.backward_in_place(&mut x);
        Ok(x)
    }

    pub fn inverse(&self) -> HermitianMatrix {
        let n = self.n;
        let mut inv = CMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            self.forward_in_place_from(&mut e, j);
            self.backward_in_place(&mut e);
            for i in 0..n {
                inv[(i, j)] = e[i];
            }
        }
        HermitianMatrix::new(inv).expect("square")
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        let n = self.n;
        HermitianMatrix::from_lower(n, |i, j| dot(&self.row(j)[..=j], &self.row(i)[..=j]))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.row(i)[i].re.ln()).sum::<f64>()
    }
}

pub fn cholesky_factor(a: &HermitianMatrix) -> Result<CholeskyFactor> {
    CholeskyFactor::new(a)
}

pub fn solve_hpd(a: &HermitianMatrix, b: &[C64]) -> Result<Vec<C64>> {
    CholeskyFactor::new(a)?.solve(b)
}

/// Blocks of `A^{-1}` for a `2m x 2m` HPD matrix.
pub fn inverse_blocks(a: &HermitianMatrix) -> Result<BlockView> {
    if a.dim() % 2 != 0 || a.dim() == 0 {
        return Err(Error::DimensionMismatch { expected: a.dim() + 1, found: a.dim() });
    }
    CholeskyFactor::new(a)?.inverse().blocks()
}

/// `x^H W y`.
pub fn quad_form(w: &CMatrix, x: &[C64], y: &[C64]) -> Result<C64> {
    if x.len() != w.rows() {
        return Err(Error::DimensionMismatch { expected: w.rows(), found: x.len() });
    }
    let wy = w.mul_vec(y)?;
    Ok(dot(x, &wy))
}
