//! Randomized SVD and randomized subspace iteration (RSI).
//!
//! RSI draws a Gaussian test matrix `Ω` (D x k), then alternates
//! `X = W Y`, `X <- orth(X)`, `Y = Wᵀ X` for `q` rounds before taking the
//! exact SVD of the small `Yᵀ`. Each round multiplies the singular values by
//! another factor of `s_i²`, so the captured subspace tilts towards the
//! dominant directions as `q` grows. `q = 1` is plain randomized SVD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gaussian_matrix, DenseMatrix, Difference, LinearOperator, RngSeed};
use crate::norm::spectral_norm;
use crate::qr::{qr_orthonormalize, HouseholderQr};
use crate::svd::{exact_svd, SvdFactors};

/// Condition estimate of `Y` above which the optional safety valve
/// re-orthonormalizes it.
pub const STABILIZE_CONDITION: f64 = 1e12;

/// Tolerance used for the spectral norm of approximation errors.
pub const ERROR_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsiConfig {
    /// Target rank `k`.
    pub rank: usize,
    /// Iteration count `q >= 1`.
    pub iterations: usize,
    pub seed: RngSeed,
    /// Extra sketch columns, discarded after the final SVD.
    #[serde(default)]
    pub oversampling: usize,
    /// Re-orthonormalize `Y` whenever its condition estimate exceeds
    /// [`STABILIZE_CONDITION`].
    #[serde(default)]
    pub stabilize: bool,
}

impl RsiConfig {
    pub fn new(rank: usize, iterations: usize, seed: RngSeed) -> Self {
        Self {
            rank,
            iterations,
            seed,
            oversampling: 0,
            stabilize: false,
        }
    }

    pub fn with_oversampling(mut self, oversampling: usize) -> Self {
        self.oversampling = oversampling;
        self
    }

    pub fn with_stabilization(mut self, stabilize: bool) -> Self {
        self.stabilize = stabilize;
        self
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let max_rank = rows.min(cols);
        if self.rank == 0 || self.rank > max_rank {
            return Err(Error::param(format!(
                "target rank {} outside [1, {max_rank}] for a {rows}x{cols} matrix",
                self.rank
            )));
        }
        if self.iterations == 0 {
            return Err(Error::param("iteration count q must be at least 1"));
        }
        if self.rank + self.oversampling > max_rank {
            return Err(Error::param(format!(
                "rank {} plus oversampling {} exceeds {max_rank}",
                self.rank, self.oversampling
            )));
        }
        Ok(())
    }
}

/// Rank-`k` factors `A` (C x k) and `B` (k x D) with `W̃ = A B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    a: DenseMatrix,
    b: DenseMatrix,
}

impl LowRankFactors {
    pub fn new(a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        if a.cols() != b.rows() {
            return Err(Error::Shape {
                op: "low-rank factors",
                lhs: a.shape(),
                rhs: b.shape(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.a.matmul(&self.b).expect("inner dimensions checked")
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.a, self.b)
    }
}

impl LinearOperator for LowRankFactors {
    fn nrows(&self) -> usize {
        self.a.rows()
    }

    fn ncols(&self) -> usize {
        self.b.cols()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.a.matmul(&self.b.matmul(x)?)
    }

    fn apply_transpose(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        self.b.t_matmul(&self.a.t_matmul(y)?)
    }

    fn magnitude(&self) -> f64 {
        self.a.frobenius_norm() * self.b.frobenius_norm()
    }
}

/// Outcome of one approximation, scored against the optimal error `s_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub k: usize,
    pub q: Option<usize>,
    /// `‖W − W̃‖₂`
    pub spectral_error: f64,
    /// `s_{k+1}`
    pub reference_sv: f64,
    /// `spectral_error / reference_sv`
    pub normalized_error: f64,
    pub wall_time_s: Option<f64>,
}

fn condition_estimate(y: &DenseMatrix) -> Result<f64> {
    let qr = HouseholderQr::factor(y)?;
    let (lo, hi) = qr
        .r_diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| (lo.min(r.abs()), hi.max(r.abs())));
    Ok(if lo == 0.0 { f64::INFINITY } else { hi / lo })
}

/// Randomized subspace iteration. Returns rank-`k` factors
/// `(Ũ: C x k, s̃, Ṽ: D x k)`.
///
/// Rank loss in the sketch `W Y` (e.g. `rank(W) < k`) surfaces as
/// [`Error::RankDeficient`].
pub fn rsi(w: &DenseMatrix, config: &RsiConfig) -> Result<SvdFactors> {
    config.validate(w.rows(), w.cols())?;
    if !w.is_finite() {
        return Err(Error::InvalidData("matrix has non-finite entries".into()));
    }
    let width = config.rank + config.oversampling;
    let wt = w.transpose();

    let mut y = gaussian_matrix(w.cols(), width, config.seed)?;
    let mut x = None;
    for round in 0..config.iterations {
        if config.stabilize && round > 0 && condition_estimate(&y)? > STABILIZE_CONDITION {
            y = qr_orthonormalize(&y)?;
        }
        let basis = qr_orthonormalize(&w.matmul(&y)?)?;
        y = wt.matmul(&basis)?;
        x = Some(basis);
    }
    let x = x.expect("at least one iteration");

    let small = exact_svd(&y.transpose())?;
    let mut factors = SvdFactors {
        u: x.matmul(&small.u)?,
        s: small.s,
        v: small.v,
    };
    if config.oversampling > 0 {
        factors = truncate_svd(&factors, config.rank)?;
    }
    Ok(factors)
}

/// Randomized SVD: [`rsi`] with a single iteration.
pub fn rsvd(w: &DenseMatrix, rank: usize, seed: RngSeed) -> Result<SvdFactors> {
    rsi(w, &RsiConfig::new(rank, 1, seed))
}

/// Keeps the leading `k` singular triplets.
pub fn truncate_svd(f: &SvdFactors, k: usize) -> Result<SvdFactors> {
    if k == 0 || k > f.rank() {
        return Err(Error::param(format!(
            "truncation rank {k} outside [1, {}]",
            f.rank()
        )));
    }
    Ok(SvdFactors {
        u: f.u.leading_columns(k)?,
        s: f.s[..k].to_vec(),
        v: f.v.leading_columns(k)?,
    })
}

/// `A = U diag(√s)`, `B = diag(√s) Vᵀ`.
pub fn split_factors(f: &SvdFactors) -> Result<LowRankFactors> {
    if let Some(i) = f.s.iter().position(|&s| s.is_nan() || s < 0.0) {
        return Err(Error::Contract(format!(
            "cannot split factors with singular value s[{i}] = {}",
            f.s[i]
        )));
    }
    let roots: Vec<f64> = f.s.iter().map(|s| s.sqrt()).collect();
    let mut a = f.u.clone();
    a.scale_columns(&roots);
    let mut bt = f.v.clone();
    bt.scale_columns(&roots);
    LowRankFactors::new(a, bt.transpose())
}

/// `‖W − A B‖₂ / s_{k+1}` with the spectral norm estimated to `rel_tol`.
///
/// The metric is undefined when `s_{k+1} = 0`; callers wanting the raw
/// error in that case should use [`crate::norm::spectral_norm`] directly.
pub fn normalized_spectral_error(
    w: &DenseMatrix,
    approx: &LowRankFactors,
    reference_sv: f64,
    rel_tol: f64,
) -> Result<ApproximationReport> {
    if reference_sv.is_nan() || reference_sv <= 0.0 {
        return Err(Error::param(format!(
            "reference singular value must be positive, got {reference_sv}"
        )));
    }
    let spectral_error = spectral_norm(&Difference::new(w, approx)?, rel_tol)?;
    Ok(ApproximationReport {
        k: approx.rank(),
        q: None,
        spectral_error,
        reference_sv,
        normalized_error: spectral_error / reference_sv,
        wall_time_s: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::GaussianStream;

    fn rank_r(m: usize, n: usize, r: usize, seed: u64) -> DenseMatrix {
        let mut g = GaussianStream::new(RngSeed(seed));
        let a = g.matrix(m, r).unwrap();
        let b = g.matrix(r, n).unwrap();
        a.matmul(&b).unwrap()
    }

    #[test]
    fn captures_exact_rank() {
        let w = rank_r(20, 30, 2, 1);
        for q in 1..=3 {
            let f = rsi(&w, &RsiConfig::new(2, q, RngSeed(9))).unwrap();
            let err = f.reconstruct().unwrap().sub(&w).unwrap().frobenius_norm();
            assert!(err <= 1e-10 * w.frobenius_norm(), "q={q} err={err}");
        }
    }

    #[test]
    fn rank_below_target_is_reported() {
        let w = rank_r(20, 30, 2, 2);
        assert!(matches!(
            rsi(&w, &RsiConfig::new(4, 1, RngSeed(0))),
            Err(Error::RankDeficient { rank: 2, .. })
        ));
    }

    #[test]
    fn diag_two_one_top_value() {
        // With Ω = (a, b)ᵀ, three rounds give s̃₁² = (4096a² + b²) / (1024a² + b²).
        // It lands in [1.99, 2] unless |b/a| > ~4.5, which a Cauchy ratio
        // does for roughly one seed in seven.
        let w = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let mut near_top = 0;
        for seed in 0..100 {
            let omega = gaussian_matrix(2, 1, RngSeed(seed)).unwrap();
            let (a2, b2) = (omega[(0, 0)].powi(2), omega[(1, 0)].powi(2));
            let expect = ((4096.0 * a2 + b2) / (1024.0 * a2 + b2)).sqrt();
            let s1 = rsi(&w, &RsiConfig::new(1, 3, RngSeed(seed))).unwrap().s[0];
            assert!((s1 - expect).abs() <= 1e-12, "seed {seed}: {s1} vs {expect}");
            assert!((1.0..=2.0 + 1e-12).contains(&s1));
            if s1 >= 1.99 {
                near_top += 1;
            }
        }
        assert!(near_top >= 75, "{near_top}/100 seeds reached 1.99");
    }

    #[test]
    fn rsvd_is_rsi_with_one_iteration() {
        let w = gaussian_matrix(15, 25, RngSeed(3)).unwrap();
        let a = rsvd(&w, 4, RngSeed(11)).unwrap();
        let b = rsi(&w, &RsiConfig::new(4, 1, RngSeed(11))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_for_seed() {
        let w = gaussian_matrix(15, 25, RngSeed(3)).unwrap();
        let cfg = RsiConfig::new(5, 3, RngSeed(1));
        assert_eq!(rsi(&w, &cfg).unwrap(), rsi(&w, &cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let w = gaussian_matrix(4, 6, RngSeed(3)).unwrap();
        assert!(rsi(&w, &RsiConfig::new(0, 1, RngSeed(0))).is_err());
        assert!(rsi(&w, &RsiConfig::new(5, 1, RngSeed(0))).is_err());
        assert!(rsi(&w, &RsiConfig::new(2, 0, RngSeed(0))).is_err());
        assert!(rsi(&w, &RsiConfig::new(3, 1, RngSeed(0)).with_oversampling(2)).is_err());
    }

    #[test]
    fn oversampling_and_stabilization_keep_shape() {
        let w = gaussian_matrix(30, 40, RngSeed(4)).unwrap();
        let f = rsi(&w, &RsiConfig::new(5, 2, RngSeed(1)).with_oversampling(5)).unwrap();
        assert_eq!((f.u.shape(), f.s.len(), f.v.shape()), ((30, 5), 5, (40, 5)));
        f.validate().unwrap();

        let plain = rsi(&w, &RsiConfig::new(5, 4, RngSeed(1))).unwrap();
        let valve = rsi(&w, &RsiConfig::new(5, 4, RngSeed(1)).with_stabilization(true)).unwrap();
        for (a, b) in plain.s.iter().zip(&valve.s) {
            assert!((a - b).abs() <= 1e-10 * plain.s[0]);
        }
    }

    #[test]
    fn truncate_diag() {
        let w = DenseMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let full = exact_svd(&w).unwrap();
        assert_eq!(truncate_svd(&full, 3).unwrap(), full);
        let t = truncate_svd(&full, 2).unwrap();
        assert_eq!(t.s, vec![3.0, 2.0]);
        let resid = w.sub(&t.reconstruct().unwrap()).unwrap();
        assert!((spectral_norm(&resid, 1e-10).unwrap() - 1.0).abs() < 1e-10);
        assert!(truncate_svd(&full, 0).is_err());
        assert!(truncate_svd(&full, 4).is_err());
    }

    #[test]
    fn split_basic_cases() {
        let f = SvdFactors {
            u: DenseMatrix::from_rows(&[&[1.0], &[0.0]]),
            s: vec![4.0],
            v: DenseMatrix::from_rows(&[&[1.0], &[0.0], &[0.0]]),
        };
        let lr = split_factors(&f).unwrap();
        assert_eq!(lr.a().as_slice(), &[2.0, 0.0]);
        assert_eq!(lr.b().as_slice(), &[2.0, 0.0, 0.0]);

        let zero = SvdFactors { s: vec![0.0], ..f.clone() };
        let lr = split_factors(&zero).unwrap();
        assert!(lr.a().max_abs() == 0.0 && lr.b().max_abs() == 0.0);

        let negative = SvdFactors { s: vec![-1.0], ..f };
        assert!(matches!(split_factors(&negative), Err(Error::Contract(_))));
    }

    #[test]
    fn split_reproduces_product() {
        let w = gaussian_matrix(9, 7, RngSeed(8)).unwrap();
        let f = truncate_svd(&exact_svd(&w).unwrap(), 3).unwrap();
        let lr = split_factors(&f).unwrap();
        let diff = lr.to_dense().sub(&f.reconstruct().unwrap()).unwrap();
        assert!(diff.max_abs() <= 1e-12);
    }

    #[test]
    fn normalized_error_of_exact_truncation() {
        let w = gaussian_matrix(12, 18, RngSeed(6)).unwrap();
        let full = exact_svd(&w).unwrap();
        for k in 1..12 {
            let lr = split_factors(&truncate_svd(&full, k).unwrap()).unwrap();
            let rep = normalized_spectral_error(&w, &lr, full.s[k], ERROR_NORM_TOL).unwrap();
            assert!((rep.normalized_error - 1.0).abs() <= 1e-6, "k={k}: {rep:?}");
        }
    }

    #[test]
    fn normalized_error_of_lossless_factors() {
        let w = gaussian_matrix(6, 8, RngSeed(7)).unwrap();
        let lr = split_factors(&exact_svd(&w).unwrap()).unwrap();
        let rep = normalized_spectral_error(&w, &lr, 0.5, ERROR_NORM_TOL).unwrap();
        assert!(rep.spectral_error <= 1e-10);
        assert!(rep.normalized_error <= 1e-9);
        assert!(normalized_spectral_error(&w, &lr, 0.0, ERROR_NORM_TOL).is_err());
    }
}
