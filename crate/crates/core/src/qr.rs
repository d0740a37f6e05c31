//! Householder QR and column orthonormalization.

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, DenseMatrix};

/// Pivots below this fraction of `max |X_ij|` count as rank loss.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// An elementary reflector `H = I - tau * v * vᵀ` with `v[0] = 1`.
#[derive(Debug, Clone)]
pub(crate) struct Reflector {
    pub tau: f64,
    pub v: Vec<f64>,
}

impl Reflector {
    /// Builds `H` with `H x = beta * e1`. Returns the reflector and `beta`.
    pub fn annihilate(x: &[f64]) -> (Reflector, f64) {
        let alpha = x[0];
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        let mut v = vec![0.0; x.len()];
        v[0] = 1.0;
        if tail_sq == 0.0 {
            return (Reflector { tau: 0.0, v }, alpha);
        }
        let norm = (alpha * alpha + tail_sq).sqrt();
        let beta = if alpha >= 0.0 { -norm } else { norm };
        let tau = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        for (vi, xi) in v[1..].iter_mut().zip(&x[1..]) {
            *vi = xi * scale;
        }
        (Reflector { tau, v }, beta)
    }

    /// Applies `H` from the left to rows `offset..` and columns `cols..` of `a`.
    pub fn apply_left(&self, a: &mut DenseMatrix, offset: usize, cols: usize) {
        if self.tau == 0.0 || cols >= a.cols() {
            return;
        }
        let width = a.cols() - cols;
        let mut w = vec![0.0; width];
        for (i, &vi) in self.v.iter().enumerate() {
            axpy(vi, &a.row(offset + i)[cols..], &mut w);
        }
        for (i, &vi) in self.v.iter().enumerate() {
            axpy(-self.tau * vi, &w, &mut a.row_mut(offset + i)[cols..]);
        }
    }

    /// Applies `H` from the right to `row[offset..offset + v.len()]`.
    #[inline]
    pub fn apply_to_row(&self, row: &mut [f64], offset: usize) {
        if self.tau == 0.0 {
            return;
        }
        let seg = &mut row[offset..offset + self.v.len()];
        let d = dot(seg, &self.v);
        axpy(-self.tau * d, &self.v, seg);
    }
}

/// Householder factorization `X = Q R` of a tall matrix, with `Q` kept
/// implicitly as reflectors.
pub(crate) struct HouseholderQr {
    rows: usize,
    cols: usize,
    reflectors: Vec<Reflector>,
    pub r_diag: Vec<f64>,
}

impl HouseholderQr {
    pub fn factor(x: &DenseMatrix) -> Result<Self> {
        let (m, k) = x.shape();
        if m < k {
            return Err(Error::Shape {
                op: "qr (needs rows >= cols)",
                lhs: (m, k),
                rhs: (k, k),
            });
        }
        let mut a = x.clone();
        let mut reflectors = Vec::with_capacity(k);
        let mut r_diag = Vec::with_capacity(k);
        for j in 0..k {
            let col: Vec<f64> = (j..m).map(|i| a[(i, j)]).collect();
            let (h, beta) = Reflector::annihilate(&col);
            h.apply_left(&mut a, j, j + 1);
            r_diag.push(beta);
            reflectors.push(h);
        }
        Ok(Self {
            rows: m,
            cols: k,
            reflectors,
            r_diag,
        })
    }

    /// The thin `m x k` orthonormal factor.
    pub fn thin_q(&self) -> DenseMatrix {
        let (m, k) = (self.rows, self.cols);
        let mut q = DenseMatrix::zeros(m, k).expect("validated shape");
        for i in 0..k {
            q[(i, i)] = 1.0;
        }
        // Backward accumulation: when H_j is applied, columns < j of rows >= j
        // are still zero.
        for (j, h) in self.reflectors.iter().enumerate().rev() {
            h.apply_left(&mut q, j, j);
        }
        q
    }
}

/// Orthonormal basis for the columns of a tall `m x k` matrix.
///
/// Fails with [`Error::RankDeficient`] when a Householder pivot falls below
/// `1e-12 * max |X_ij|`; the error carries the detected rank and the first
/// dependent column (0-based).
pub fn qr_orthonormalize(x: &DenseMatrix) -> Result<DenseMatrix> {
    let qr = HouseholderQr::factor(x)?;
    let threshold = RANK_TOLERANCE * x.max_abs();
    let mut first_bad = None;
    let mut rank = 0;
    for (j, r) in qr.r_diag.iter().enumerate() {
        if r.abs() <= threshold {
            first_bad.get_or_insert(j);
        } else {
            rank += 1;
        }
    }
    if let Some(column) = first_bad {
        return Err(Error::RankDeficient { rank, column });
    }
    Ok(qr.thin_q())
}

/// Like [`qr_orthonormalize`] but never fails on rank loss: dependent columns
/// are completed with orthonormal directions.
pub(crate) fn orthonormal_completion(x: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(HouseholderQr::factor(x)?.thin_q())
}
