//! Spectral norm estimation by block power iteration on `WᵀW`.
//!
//! Each step applies the operator and its transpose to an orthonormal block
//! and extracts Ritz values from the small product. The top Ritz value never
//! exceeds the true norm. Iteration stops when any of these falls below the
//! tolerance:
//!
//! - the residual `‖Wᵀu₁ − σ₁v₁‖`,
//! - the gap-scaled quadratic bound on the Ritz value error,
//! - the Aitken-extrapolated remaining change of the Ritz value, once its
//!   contraction rate has settled (tightly clustered spectra).
//!
//! Residuals at the operator's rounding level also count as converged.

use crate::error::{Error, Result};
use crate::matrix::{gaussian_matrix, norm2, LinearOperator, RngSeed};
use crate::qr::orthonormal_completion;
use crate::svd::exact_svd;

const BLOCK: usize = 8;
const START_SEED: RngSeed = RngSeed(0x5e_ed0f_5eed);

/// Iteration cap for a given tolerance: `10 * ceil(ln(1/rel_tol)) + 100`.
pub fn iteration_cap(rel_tol: f64) -> usize {
    10 * (1.0 / rel_tol).ln().ceil() as usize + 100
}

/// Largest singular value of `op`, to relative accuracy `rel_tol`.
pub fn spectral_norm<O: LinearOperator + ?Sized>(op: &O, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::param(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let (m, n) = (op.nrows(), op.ncols());
    let b = BLOCK.min(m).min(n);
    let mut q = orthonormal_completion(&gaussian_matrix(n, b, START_SEED)?)?;
    let floor = 4.0 * f64::EPSILON * (m.max(n) as f64).sqrt() * op.magnitude();
    let mut last = f64::INFINITY;
    let mut history: [f64; 4] = [f64::NAN; 4];
    for _ in 0..iteration_cap(rel_tol) {
        let z = op.apply(&q)?;
        if !z.is_finite() {
            return Err(Error::NumericalFailure {
                op: "spectral_norm",
                residual: f64::NAN,
            });
        }
        if z.max_abs() == 0.0 {
            return Ok(0.0);
        }
        let ritz = exact_svd(&z)?;
        let sigma = ritz.s[0];
        let y = op.apply_transpose(&z)?;

        // res = Wᵀu₁ - σ₁v₁ with u₁ = Z r / σ₁ and v₁ = Q r.
        let r = ritz.v.column(0);
        let yr = y.matvec(&r)?;
        let qr = q.matvec(&r)?;
        let res: Vec<f64> = yr.iter().zip(&qr).map(|(a, b)| a / sigma - sigma * b).collect();
        let res = norm2(&res);
        let second = ritz.s.get(1).copied().unwrap_or(0.0);
        let gap = sigma * sigma - second * second;
        let quadratic = if gap > 0.0 {
            sigma * res * res / (2.0 * gap)
        } else {
            f64::INFINITY
        };
        if res <= rel_tol * sigma + floor || quadratic <= 0.1 * rel_tol * sigma {
            return Ok(sigma);
        }
        history = [history[1], history[2], history[3], sigma];
        if let Some(remaining) = extrapolated_change(&history) {
            if remaining <= 0.1 * rel_tol * sigma {
                return Ok(sigma);
            }
        }
        last = res / sigma;
        q = orthonormal_completion(&y)?;
    }
    Err(Error::NumericalFailure {
        op: "spectral_norm",
        residual: last,
    })
}

/// Remaining change of a geometrically converging sequence, estimated from
/// its last four terms. `None` until the rate is a steady contraction.
fn extrapolated_change(h: &[f64; 4]) -> Option<f64> {
    let d = [h[1] - h[0], h[2] - h[1], h[3] - h[2]];
    if !(d[0] > 0.0 && d[1] > 0.0 && d[2] >= 0.0) {
        return None;
    }
    let (r1, r2) = (d[1] / d[0], d[2] / d[1]);
    if r2 >= 0.999 || (r2 - r1).abs() > 0.05 * r2.max(r1) {
        return None;
    }
    Some(d[2] * r2 / (1.0 - r2))
}
