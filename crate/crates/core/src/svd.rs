//! Exact SVD by Householder bidiagonalization followed by implicit-shift QR
//! on the bidiagonal (Golub–Kahan).
//!
//! Wide inputs are handled by factoring the transpose. The accumulated
//! orthogonal factors are kept as *transposes* while rotations are applied,
//! so that every Givens rotation mixes two contiguous rows.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, LinearOperator};
use crate::qr::Reflector;

/// Upper bound on implicit QR sweeps spent on a single singular value.
const MAX_SWEEPS_PER_VALUE: usize = 75;

/// A (possibly truncated) singular value decomposition `U diag(s) Vᵀ`.
///
/// `u` is `m x r`, `v` is `n x r`, and `s` is sorted in descending order.
/// Column signs are fixed so that the first largest-magnitude entry of each
/// column of `v` is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Checks shapes, ordering and nonnegativity (not orthonormality).
    pub fn validate(&self) -> Result<()> {
        let r = self.s.len();
        if self.u.cols() != r || self.v.cols() != r {
            return Err(Error::Contract(format!(
                "factor widths {} / {} do not match {r} singular values",
                self.u.cols(),
                self.v.cols()
            )));
        }
        if let Some(i) = self.s.iter().position(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::Contract(format!(
                "singular value {i} is negative or NaN: {}",
                self.s[i]
            )));
        }
        if self.s.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Contract("singular values not descending".into()));
        }
        Ok(())
    }

    /// Dense `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        let mut us = self.u.clone();
        us.scale_columns(&self.s);
        us.matmul(&self.v.transpose())
    }

    /// Flips column pairs so each `v` column's first largest-magnitude entry
    /// is nonnegative.
    pub fn normalize_signs(&mut self) {
        for j in 0..self.s.len() {
            if leading_sign_negative(self.v.column(j).iter().copied()) {
                for i in 0..self.u.rows() {
                    self.u[(i, j)] = -self.u[(i, j)];
                }
                for i in 0..self.v.rows() {
                    self.v[(i, j)] = -self.v[(i, j)];
                }
            }
        }
    }
}

impl LinearOperator for SvdFactors {
    fn nrows(&self) -> usize {
        self.u.rows()
    }

    fn ncols(&self) -> usize {
        self.v.rows()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut t = self.v.t_matmul(x)?;
        scale_rows(&mut t, &self.s);
        self.u.matmul(&t)
    }

    fn apply_transpose(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        let mut t = self.u.t_matmul(y)?;
        scale_rows(&mut t, &self.s);
        self.v.matmul(&t)
    }

    fn magnitude(&self) -> f64 {
        self.s.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

fn scale_rows(m: &mut DenseMatrix, s: &[f64]) {
    for (i, &si) in s.iter().enumerate() {
        m.row_mut(i).iter_mut().for_each(|v| *v *= si);
    }
}

fn leading_sign_negative(values: impl Iterator<Item = f64>) -> bool {
    let mut best = 0.0_f64;
    let mut negative = false;
    for x in values {
        if x.abs() > best {
            best = x.abs();
            negative = x < 0.0;
        }
    }
    negative
}

/// Full thin SVD of `w`: `r = min(rows, cols)` singular triplets.
pub fn exact_svd(w: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = w.shape();
    let (left, s, right) = if m >= n {
        let f = svd_tall(w, true)?;
        (f.ut.expect("vectors"), f.s, f.vt.expect("vectors"))
    } else {
        // Wᵀ = U' S V'ᵀ  =>  W = V' S U'ᵀ
        let f = svd_tall(&w.transpose(), true)?;
        (f.vt.expect("vectors"), f.s, f.ut.expect("vectors"))
    };
    // Rows of `left` / `right` are the columns of U / V.
    let mut left = left;
    let mut right = right;
    for j in 0..s.len() {
        if leading_sign_negative(right.row(j).iter().copied()) {
            left.row_mut(j).iter_mut().for_each(|v| *v = -*v);
            right.row_mut(j).iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(SvdFactors {
        u: left.transpose(),
        s,
        v: right.transpose(),
    })
}

/// Singular values only, in descending order. Skips vector accumulation.
pub fn singular_values(w: &DenseMatrix) -> Result<Vec<f64>> {
    let f = if w.rows() >= w.cols() {
        svd_tall(w, false)?
    } else {
        svd_tall(&w.transpose(), false)?
    };
    Ok(f.s)
}

struct TallSvd {
    /// `n x m`, rows are left singular vectors.
    ut: Option<DenseMatrix>,
    s: Vec<f64>,
    /// `n x n`, rows are right singular vectors.
    vt: Option<DenseMatrix>,
}

fn rotate_rows(mat: &mut DenseMatrix, j: usize, l: usize, cs: f64, sn: f64) {
    debug_assert_ne!(j, l);
    let cols = mat.cols();
    let data = mat.as_mut_slice();
    let (x, y) = if j < l {
        let (lo, hi) = data.split_at_mut(l * cols);
        (&mut lo[j * cols..(j + 1) * cols], &mut hi[..cols])
    } else {
        let (lo, hi) = data.split_at_mut(j * cols);
        (&mut hi[..cols], &mut lo[l * cols..(l + 1) * cols])
    };
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let t = cs * *a + sn * *b;
        *b = -sn * *a + cs * *b;
        *a = t;
    }
}

fn svd_tall(a: &DenseMatrix, vectors: bool) -> Result<TallSvd> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);

    // Bidiagonalize: A = U B Vᵀ with d on the diagonal, e above it.
    let mut work = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for k in 0..n {
        let col: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        let (h, beta) = Reflector::annihilate(&col);
        h.apply_left(&mut work, k, k + 1);
        d[k] = beta;
        left.push(h);
        if k + 1 < n {
            let (g, beta) = Reflector::annihilate(&work.row(k)[k + 1..]);
            for i in k + 1..m {
                g.apply_to_row(work.row_mut(i), k + 1);
            }
            e[k] = beta;
            right.push(g);
        }
    }
    drop(work);

    // Uᵀ = [I 0] H_{n-1} ... H_0 and Vᵀ = G_{n-2} ... G_0, built backwards so
    // that H_k only touches rows >= k.
    let mut ut = None;
    let mut vt = None;
    // For tall inputs, left rotations go to a small n x n accumulator that is
    // multiplied into Uᵀ once at the end.
    let mut pt = None;
    if vectors {
        let mut u = DenseMatrix::zeros(n, m)?;
        for i in 0..n {
            u[(i, i)] = 1.0;
        }
        for (k, h) in left.iter().enumerate().rev() {
            for r in k..n {
                h.apply_to_row(u.row_mut(r), k);
            }
        }
        let mut v = DenseMatrix::identity(n)?;
        for (k, g) in right.iter().enumerate().rev() {
            for r in k + 1..n {
                g.apply_to_row(v.row_mut(r), k + 1);
            }
        }
        if m >= 2 * n {
            pt = Some(DenseMatrix::identity(n)?);
        }
        ut = Some(u);
        vt = Some(v);
    }

    bidiagonal_qr(&mut d, &mut e, pt.as_mut().or(ut.as_mut()), vt.as_mut())?;

    if let (Some(p), Some(u)) = (pt, ut.as_ref()) {
        ut = Some(p.matmul(u)?);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let s = order.iter().map(|&i| d[i]).collect();
    let permute = |mat: DenseMatrix| -> DenseMatrix {
        let mut out = Vec::with_capacity(mat.rows() * mat.cols());
        for &i in &order {
            out.extend_from_slice(mat.row(i));
        }
        DenseMatrix::new(mat.rows(), mat.cols(), out).expect("same shape")
    };
    Ok(TallSvd {
        ut: ut.map(permute),
        s,
        vt: vt.map(permute),
    })
}

/// Implicit-shift QR on the upper bidiagonal `(d, e)`, accumulating left
/// rotations into the rows of `ut` and right rotations into the rows of `vt`.
/// On return `d` holds nonnegative (unsorted) singular values.
fn bidiagonal_qr(
    d: &mut [f64],
    e: &mut [f64],
    mut ut: Option<&mut DenseMatrix>,
    mut vt: Option<&mut DenseMatrix>,
) -> Result<()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let tiny = 2f64.powi(-966);
    let mut p = n;
    let mut sweeps = 0;

    enum Step {
        DeflateBottom,
        Split,
        QrSweep,
        Converged,
    }

    while p > 0 {
        // Largest k < p-1 with negligible e[k], or none.
        let mut k = p as isize - 2;
        while k >= 0 {
            let ku = k as usize;
            if e[ku].abs() <= tiny + eps * (d[ku].abs() + d[ku + 1].abs()) {
                e[ku] = 0.0;
                break;
            }
            k -= 1;
        }
        let step = if k == p as isize - 2 {
            Step::Converged
        } else {
            let mut ks = p as isize - 1;
            while ks > k {
                let ksu = ks as usize;
                let t = e[ksu].abs() + if ks != k + 1 { e[ksu - 1].abs() } else { 0.0 };
                if d[ksu].abs() <= tiny + eps * t {
                    d[ksu] = 0.0;
                    break;
                }
                ks -= 1;
            }
            if ks == k {
                Step::QrSweep
            } else if ks == p as isize - 1 {
                Step::DeflateBottom
            } else {
                k = ks;
                Step::Split
            }
        };
        let k = (k + 1) as usize;

        match step {
            Step::DeflateBottom => {
                // d[p-1] negligible: chase e[p-2] up with right rotations.
                let mut f = e[p - 2];
                e[p - 2] = 0.0;
                for j in (k..p - 1).rev() {
                    let t = d[j].hypot(f);
                    let (cs, sn) = (d[j] / t, f / t);
                    d[j] = t;
                    if j != k {
                        f = -sn * e[j - 1];
                        e[j - 1] *= cs;
                    }
                    if let Some(v) = vt.as_deref_mut() {
                        rotate_rows(v, j, p - 1, cs, sn);
                    }
                }
            }
            Step::Split => {
                // d[k-1] negligible: chase e[k-1] right with left rotations.
                let mut f = e[k - 1];
                e[k - 1] = 0.0;
                for j in k..p {
                    let t = d[j].hypot(f);
                    let (cs, sn) = (d[j] / t, f / t);
                    d[j] = t;
                    f = -sn * e[j];
                    e[j] *= cs;
                    if let Some(u) = ut.as_deref_mut() {
                        rotate_rows(u, j, k - 1, cs, sn);
                    }
                }
            }
            Step::QrSweep => {
                sweeps += 1;
                if sweeps > MAX_SWEEPS_PER_VALUE {
                    let residual = e[..p].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                    return Err(Error::NumericalFailure {
                        op: "exact_svd",
                        residual,
                    });
                }
                // Wilkinson-style shift from the trailing 2x2 of BᵀB.
                let scale = d[p - 1]
                    .abs()
                    .max(d[p - 2].abs())
                    .max(e[p - 2].abs())
                    .max(d[k].abs())
                    .max(e[k].abs());
                let sp = d[p - 1] / scale;
                let spm1 = d[p - 2] / scale;
                let epm1 = e[p - 2] / scale;
                let sk = d[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0;
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = 0.0;
                if b != 0.0 || c != 0.0 {
                    shift = (b * b + c).sqrt();
                    if b < 0.0 {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;
                for j in k..p - 1 {
                    let t = f.hypot(g);
                    let (cs, sn) = (f / t, g / t);
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * d[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * d[j];
                    g = sn * d[j + 1];
                    d[j + 1] *= cs;
                    if let Some(v) = vt.as_deref_mut() {
                        rotate_rows(v, j, j + 1, cs, sn);
                    }
                    let t = f.hypot(g);
                    let (cs, sn) = (f / t, g / t);
                    d[j] = t;
                    f = cs * e[j] + sn * d[j + 1];
                    d[j + 1] = -sn * e[j] + cs * d[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] *= cs;
                    if let Some(u) = ut.as_deref_mut() {
                        rotate_rows(u, j, j + 1, cs, sn);
                    }
                }
                e[p - 2] = f;
            }
            Step::Converged => {
                if d[k] <= 0.0 {
                    d[k] = if d[k] < 0.0 { -d[k] } else { 0.0 };
                    if let Some(v) = vt.as_deref_mut() {
                        v.row_mut(k).iter_mut().for_each(|x| *x = -*x);
                    }
                }
                sweeps = 0;
                p -= 1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{gaussian_matrix, RngSeed};

    fn max_orth_defect(q: &DenseMatrix) -> f64 {
        let g = q.t_matmul(q).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - t).abs());
            }
        }
        worst
    }

    fn check(w: &DenseMatrix) -> SvdFactors {
        let f = exact_svd(w).unwrap();
        f.validate().unwrap();
        assert_eq!(f.rank(), w.rows().min(w.cols()));
        assert!(max_orth_defect(&f.u) <= 1e-10);
        assert!(max_orth_defect(&f.v) <= 1e-10);
        let err = f.reconstruct().unwrap().sub(w).unwrap().frobenius_norm();
        assert!(err <= 1e-11 * w.frobenius_norm().max(f64::MIN_POSITIVE), "residual {err}");
        f
    }

    #[test]
    fn diagonal_case() {
        let w = DenseMatrix::from_rows(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let f = check(&w);
        assert!((f.s[0] - 3.0).abs() < 1e-15 && (f.s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_diagonal_is_made_positive() {
        let w = DenseMatrix::from_rows(&[&[-2.0, 0.0], &[0.0, 5.0], &[0.0, 0.0]]);
        let f = check(&w);
        assert_eq!(f.s, vec![5.0, 2.0]);
    }

    #[test]
    fn zero_matrix() {
        let w = DenseMatrix::zeros(4, 6).unwrap();
        let f = exact_svd(&w).unwrap();
        assert_eq!(f.s, vec![0.0; 4]);
        assert!(max_orth_defect(&f.u) <= 1e-12);
        assert!(max_orth_defect(&f.v) <= 1e-12);
    }

    #[test]
    fn single_entry_and_vectors() {
        check(&DenseMatrix::from_rows(&[&[-4.0]]));
        check(&gaussian_matrix(1, 9, RngSeed(1)).unwrap());
        check(&gaussian_matrix(9, 1, RngSeed(2)).unwrap());
    }

    #[test]
    fn random_shapes_reconstruct() {
        for (seed, (m, n)) in [(3, 4), (8, 5), (17, 17), (40, 9), (9, 40), (64, 30)]
            .into_iter()
            .enumerate()
        {
            check(&gaussian_matrix(m, n, RngSeed(seed as u64)).unwrap());
        }
    }

    #[test]
    fn rank_deficient_and_repeated_values() {
        // Rank 2 outer-product sum plus an exactly repeated value.
        let a = gaussian_matrix(12, 2, RngSeed(5)).unwrap();
        let b = gaussian_matrix(2, 10, RngSeed(6)).unwrap();
        let f = check(&a.matmul(&b).unwrap());
        assert!(f.s[2..].iter().all(|&s| s < 1e-12 * f.s[0]));
        let f = check(&DenseMatrix::identity(7).unwrap());
        assert!(f.s.iter().all(|&s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sign_convention_holds() {
        let f = check(&gaussian_matrix(10, 6, RngSeed(9)).unwrap());
        for j in 0..f.rank() {
            assert!(!leading_sign_negative(f.v.column(j).into_iter()));
        }
    }

    #[test]
    fn values_only_matches_full() {
        let w = gaussian_matrix(30, 70, RngSeed(10)).unwrap();
        let full = exact_svd(&w).unwrap();
        let s = singular_values(&w).unwrap();
        for (a, b) in full.s.iter().zip(&s) {
            assert!((a - b).abs() <= 1e-12 * full.s[0]);
        }
    }

    #[test]
    fn tall_accumulator_path() {
        // m >= 2n routes left rotations through the small accumulator.
        check(&gaussian_matrix(90, 20, RngSeed(12)).unwrap());
        check(&gaussian_matrix(20, 90, RngSeed(13)).unwrap());
    }
}
