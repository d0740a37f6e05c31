//! Dense row-major matrices, seeded Gaussian sketches and the linear-operator
//! abstraction used by the norm estimator.
//!
//! Storage is row-major: entry `(i, j)` lives at `data[i * cols + j]`. All
//! products are written as row-wise `axpy` loops so the inner loop always
//! walks contiguous memory.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `rows x cols` matrix of `f64` in row-major order.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

fn checked_len(rows: usize, cols: usize) -> Result<usize> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidData(format!(
            "dimensions must be positive, got {rows}x{cols}"
        )));
    }
    rows.checked_mul(cols)
        .filter(|&n| n <= isize::MAX as usize / std::mem::size_of::<f64>())
        .ok_or(Error::Size { rows, cols })
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(rows, cols)?;
        if data.len() != len {
            return Err(Error::InvalidData(format!(
                "expected {len} entries for {rows}x{cols}, got {}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        let len = checked_len(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            data: vec![0.0; len],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        Ok(m)
    }

    /// Builds a matrix from equally long rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data).expect("non-empty rows")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let len = checked_len(rows, cols)?;
        let mut data = Vec::with_capacity(len);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Square matrix with `values` on the diagonal.
    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(values.len(), values.len())?;
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        // Blocked to keep both sides cache-resident on large matrices.
        const B: usize = 32;
        for ib in (0..self.rows).step_by(B) {
            for jb in (0..self.cols).step_by(B) {
                for i in ib..(ib + B).min(self.rows) {
                    for j in jb..(jb + B).min(self.cols) {
                        data[j * self.rows + i] = self.data[i * self.cols + j];
                    }
                }
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let n = rhs.cols;
        let mut out = vec![0.0; self.rows * n];
        for (i, out_row) in out.chunks_exact_mut(n).enumerate() {
            for (l, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, rhs.row(l), out_row);
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: n,
            data: out,
        })
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::Shape {
                op: "t_matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let n = rhs.cols;
        let mut out = vec![0.0; self.cols * n];
        for i in 0..self.rows {
            let r = rhs.row(i);
            for (j, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, r, &mut out[j * n..(j + 1) * n]);
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.cols,
            cols: n,
            data: out,
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape {
                op: "matvec",
                lhs: self.shape(),
                rhs: (x.len(), 1),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn t_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Shape {
                op: "t_matvec",
                lhs: self.shape(),
                rhs: (y.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::Shape {
                op: "sub",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix { data, ..*self })
    }

    /// Multiplies column `j` by `scale[j]`.
    pub fn scale_columns(&mut self, scale: &[f64]) {
        assert_eq!(scale.len(), self.cols);
        for row in self.data.chunks_exact_mut(self.cols) {
            for (v, s) in row.iter_mut().zip(scale) {
                *v *= s;
            }
        }
    }

    /// Keeps the leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<DenseMatrix> {
        if k == 0 || k > self.cols {
            return Err(Error::param(format!(
                "cannot take {k} leading columns of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * k);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[..k]);
        }
        DenseMatrix::new(self.rows, k, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Seed for every randomized routine in the crate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Seed for trial `index` of a multi-trial sweep (`seed XOR index`).
    pub fn trial(self, index: u64) -> RngSeed {
        RngSeed(self.0 ^ index)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

/// Standard normal variates from a ChaCha8 counter-mode stream via Box–Muller.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: RngSeed) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed.0),
            spare: None,
        }
    }

    fn uniform_open(&mut self) -> f64 {
        // (0, 1]: 53 random bits shifted away from zero.
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let len = checked_len(rows, cols)?;
        let data = (0..len).map(|_| self.next_normal()).collect();
        DenseMatrix::new(rows, cols, data)
    }
}

/// A `rows x cols` matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: RngSeed) -> Result<DenseMatrix> {
    GaussianStream::new(seed).matrix(rows, cols)
}

/// Anything that can be applied, with its transpose, to a block of vectors.
///
/// `apply` maps an `ncols x b` block to `nrows x b`; `apply_transpose` goes
/// the other way.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
    fn apply_transpose(&self, y: &DenseMatrix) -> Result<DenseMatrix>;
    /// Cheap upper bound on the spectral norm (e.g. Frobenius). Sets the
    /// rounding floor below which norm estimates stop refining.
    fn magnitude(&self) -> f64;
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmul(x)
    }

    fn apply_transpose(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        self.t_matmul(y)
    }

    fn magnitude(&self) -> f64 {
        self.frobenius_norm()
    }
}

/// The operator `lhs - rhs`, applied without forming the difference.
pub struct Difference<'a, L: ?Sized, R: ?Sized> {
    lhs: &'a L,
    rhs: &'a R,
}

impl<'a, L, R> Difference<'a, L, R>
where
    L: LinearOperator + ?Sized,
    R: LinearOperator + ?Sized,
{
    pub fn new(lhs: &'a L, rhs: &'a R) -> Result<Self> {
        if lhs.nrows() != rhs.nrows() || lhs.ncols() != rhs.ncols() {
            return Err(Error::Shape {
                op: "difference",
                lhs: (lhs.nrows(), lhs.ncols()),
                rhs: (rhs.nrows(), rhs.ncols()),
            });
        }
        Ok(Self { lhs, rhs })
    }
}

impl<L, R> LinearOperator for Difference<'_, L, R>
where
    L: LinearOperator + ?Sized,
    R: LinearOperator + ?Sized,
{
    fn nrows(&self) -> usize {
        self.lhs.nrows()
    }

    fn ncols(&self) -> usize {
        self.lhs.ncols()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.lhs.apply(x)?.sub(&self.rhs.apply(x)?)
    }

    fn apply_transpose(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        self.lhs.apply_transpose(y)?.sub(&self.rhs.apply_transpose(y)?)
    }

    fn magnitude(&self) -> f64 {
        self.lhs.magnitude() + self.rhs.magnitude()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let g = gaussian_matrix(1000, 1000, RngSeed(7)).unwrap();
        let n = g.as_slice().len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.02, "variance {var}");
    }

    #[test]
    fn gaussian_is_deterministic_and_seed_sensitive() {
        let a = gaussian_matrix(3, 2, RngSeed(7)).unwrap();
        let b = gaussian_matrix(3, 2, RngSeed(7)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = gaussian_matrix(2, 2, RngSeed(7)).unwrap();
        let d = gaussian_matrix(2, 2, RngSeed(8)).unwrap();
        assert_ne!(c.as_slice(), d.as_slice());
    }

    #[test]
    fn gaussian_rejects_overflowing_dimensions() {
        assert!(matches!(
            gaussian_matrix(usize::MAX, 2, RngSeed(0)),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(DenseMatrix::zeros(0, 3).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn products_agree_with_transpose() {
        let a = gaussian_matrix(7, 5, RngSeed(1)).unwrap();
        let b = gaussian_matrix(7, 3, RngSeed(2)).unwrap();
        let via_t = a.transpose().matmul(&b).unwrap();
        let direct = a.t_matmul(&b).unwrap();
        for (x, y) in via_t.as_slice().iter().zip(direct.as_slice()) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn transpose_large_blocked() {
        let a = gaussian_matrix(70, 45, RngSeed(3)).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (45, 70));
        for i in 0..70 {
            for j in 0..45 {
                assert_eq!(a[(i, j)], t[(j, i)]);
            }
        }
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn difference_operator() {
        let a = gaussian_matrix(4, 6, RngSeed(4)).unwrap();
        let b = gaussian_matrix(4, 6, RngSeed(5)).unwrap();
        let x = gaussian_matrix(6, 2, RngSeed(6)).unwrap();
        let d = Difference::new(&a, &b).unwrap();
        let lhs = d.apply(&x).unwrap();
        let rhs = a.sub(&b).unwrap().matmul(&x).unwrap();
        for (p, q) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            assert!((p - q).abs() < 1e-13);
        }
        let wrong = gaussian_matrix(3, 6, RngSeed(5)).unwrap();
        assert!(Difference::new(&a, &wrong).is_err());
    }
}
