//! Softmax, its Jacobian, and the probability perturbation bound for a
//! compressed classifier head.
//!
//! For features with `‖h‖₂ ≤ R` the logits move by at most `R ‖W − W̃‖₂` in
//! the max norm, and softmax is ½-Lipschitz from max norm to max norm, so
//! `‖p̃ − p‖_∞ ≤ ½ R ‖W − W̃‖₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm2, DenseMatrix, Difference, LinearOperator};
use crate::norm::spectral_norm;

/// Tolerance for the spectral norm inside the bound.
pub const BOUND_NORM_TOL: f64 = 1e-8;
/// Absolute slack when checking the bound.
pub const BOUND_SLACK: f64 = 1e-10;

/// Numerically stable softmax (max subtraction).
pub fn softmax(u: &[f64]) -> Result<Vec<f64>> {
    if u.is_empty() {
        return Err(Error::param("softmax of an empty vector"));
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("logit {i} is not finite: {}", u[i])));
    }
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = u.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `J = diag(σ) − σσᵀ`.
pub fn softmax_jacobian(u: &[f64]) -> Result<DenseMatrix> {
    let s = softmax(u)?;
    DenseMatrix::from_fn(s.len(), s.len(), |i, j| {
        if i == j {
            s[i] - s[i] * s[i]
        } else {
            -s[i] * s[j]
        }
    })
}

/// `½ · R · ‖W − W̃‖₂`.
pub fn perturbation_bound<O>(w: &DenseMatrix, approx: &O, radius: f64) -> Result<f64>
where
    O: LinearOperator + ?Sized,
{
    check_radius(radius)?;
    let err = spectral_norm(&Difference::new(w, approx)?, BOUND_NORM_TOL)?;
    Ok(0.5 * radius * err)
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("radius R must be finite and positive, got {radius}")))
    }
}

/// Largest row norm of an `N x D` feature matrix.
pub fn feature_radius(features: &DenseMatrix) -> f64 {
    (0..features.rows())
        .map(|i| norm2(features.row(i)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "R")]
    pub radius: f64,
    pub spectral_error: f64,
    pub theoretical_bound: f64,
    pub empirical_max_dev: f64,
    pub samples_tested: usize,
    /// Features whose arg-max class changed. Informational only; the bound
    /// says nothing about it.
    pub label_flips: usize,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Evaluates `max_h ‖softmax(W̃h + b) − softmax(Wh + b)‖_∞` over the rows
/// of `features` and compares it with the bound.
///
/// Every feature must satisfy `‖h‖₂ ≤ R`. A measured deviation above the
/// bound is reported as [`Error::Contract`].
pub fn empirical_deviation<O>(
    w: &DenseMatrix,
    approx: &O,
    bias: Option<&[f64]>,
    features: &DenseMatrix,
    radius: f64,
) -> Result<BoundReport>
where
    O: LinearOperator + ?Sized,
{
    check_radius(radius)?;
    let (c, d) = w.shape();
    if features.cols() != d {
        return Err(Error::Shape {
            op: "features (N x D) against W (C x D)",
            lhs: features.shape(),
            rhs: w.shape(),
        });
    }
    if let Some(b) = bias {
        if b.len() != c {
            return Err(Error::param(format!("bias has length {} but W has {c} rows", b.len())));
        }
    }
    if !features.is_finite() {
        return Err(Error::InvalidData("features contain non-finite values".into()));
    }
    let limit = radius * (1.0 + 1e-12);
    for i in 0..features.rows() {
        let norm = norm2(features.row(i));
        if norm > limit {
            return Err(Error::FeatureNorm { index: i, norm, radius });
        }
    }

    let spectral_error = spectral_norm(&Difference::new(w, approx)?, BOUND_NORM_TOL)?;
    let theoretical_bound = 0.5 * radius * spectral_error;

    let h = features.transpose();
    let z = w.apply(&h)?;
    let z_tilde = approx.apply(&h)?;
    let mut max_dev = 0.0_f64;
    let mut flips = 0;
    let mut col = vec![0.0; c];
    let mut col_tilde = vec![0.0; c];
    for n in 0..features.rows() {
        for i in 0..c {
            let b = bias.map_or(0.0, |b| b[i]);
            col[i] = z[(i, n)] + b;
            col_tilde[i] = z_tilde[(i, n)] + b;
        }
        let p = softmax(&col)?;
        let p_tilde = softmax(&col_tilde)?;
        let dev = p.iter().zip(&p_tilde).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        max_dev = max_dev.max(dev);
        if argmax(&p) != argmax(&p_tilde) {
            flips += 1;
        }
    }

    // The estimate of ‖W − W̃‖₂ may sit below the truth by its tolerance.
    if max_dev > theoretical_bound * (1.0 + BOUND_NORM_TOL) + BOUND_SLACK {
        return Err(Error::Contract(format!(
            "softmax deviation {max_dev:e} exceeds bound {theoretical_bound:e}"
        )));
    }
    Ok(BoundReport {
        radius,
        spectral_error,
        theoretical_bound,
        empirical_max_dev: max_dev,
        samples_tested: features.rows(),
        label_flips: flips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0; 4]).unwrap(), vec![0.25; 4]);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
        assert!(softmax(&[f64::NAN]).is_err());
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn jacobian_of_uniform_pair() {
        let j = softmax_jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j.as_slice(), &[0.25, -0.25, -0.25, 0.25]);
    }

    #[test]
    fn two_class_closed_form() {
        let w = DenseMatrix::from_rows(&[&[1.0], &[0.0]]);
        let wt = DenseMatrix::from_rows(&[&[1.1], &[0.0]]);
        let h = DenseMatrix::from_rows(&[&[1.0]]);
        let rep = empirical_deviation(&w, &wt, None, &h, 1.0).unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert!((rep.empirical_max_dev - (sig(1.1) - sig(1.0))).abs() < 1e-15);
        assert!((rep.theoretical_bound - 0.05).abs() < 1e-9);
        assert!(rep.empirical_max_dev <= 0.05);
    }

    #[test]
    fn bound_examples() {
        let w = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(perturbation_bound(&w, &w, 2.0).unwrap(), 0.0);
        // Difference 2·e1 e2ᵀ has norm 2.
        let mut wt = w.clone();
        wt[(0, 1)] -= 2.0;
        assert!((perturbation_bound(&w, &wt, 3.0).unwrap() - 3.0).abs() < 1e-8);
        assert!(perturbation_bound(&w, &wt, 0.0).is_err());
        let wide = DenseMatrix::zeros(2, 3).unwrap();
        assert!(perturbation_bound(&w, &wide, 1.0).is_err());
    }

    #[test]
    fn feature_norm_violation_names_row() {
        let w = DenseMatrix::identity(2).unwrap();
        let feats = DenseMatrix::from_rows(&[&[0.1, 0.1], &[3.0, 4.0]]);
        match empirical_deviation(&w, &w, None, &feats, 1.0) {
            Err(Error::FeatureNorm { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(feature_radius(&feats), 5.0);
    }

    #[test]
    fn identical_weights_deviate_by_zero() {
        let w = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.1).unwrap();
        let feats = DenseMatrix::from_fn(5, 4, |i, j| ((i + j) % 3) as f64 * 0.2).unwrap();
        let r = feature_radius(&feats);
        let rep = empirical_deviation(&w, &w, Some(&[0.1, -0.2, 0.3]), &feats, r).unwrap();
        assert_eq!(rep.empirical_max_dev, 0.0);
        assert_eq!(rep.label_flips, 0);
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("R").is_some());
    }
}
