//! Synthetic matrices with prescribed singular values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, GaussianStream, RngSeed};
use crate::qr::qr_orthonormalize;
use crate::svd::SvdFactors;

/// Shape of a singular-value sequence. Index `i` is 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `exp(−rate·i)` for `i < head_count`, then a power-law tail
    /// `s_{head−1}·(head/(i+1))^tail_exponent`.
    Knee {
        head_count: usize,
        head_decay_rate: f64,
        tail_exponent: f64,
    },
    /// `(i+1)^−exponent`
    PowerLaw { exponent: f64 },
    /// `exp(−rate·i)`
    Exponential { rate: f64 },
    Flat { value: f64 },
    /// Given values, used as is (times `scale`).
    Explicit { values: Vec<f64> },
}

impl Profile {
    pub fn default_knee() -> Self {
        Profile::Knee {
            head_count: 32,
            head_decay_rate: 0.2,
            tail_exponent: 0.5,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub profile: Profile,
    pub length: usize,
    #[serde(default = "one")]
    pub scale: f64,
}

impl SpectrumSpec {
    pub fn new(profile: Profile, length: usize) -> Self {
        Self {
            profile,
            length,
            scale: 1.0,
        }
    }
}

fn check_param(name: &str, value: f64, allow_zero: bool) -> Result<()> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be {}, got {value}", if allow_zero { "finite and >= 0" } else { "finite and > 0" })))
    }
}

/// Evaluates the profile. Output is strictly positive and non-increasing.
pub fn make_spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>> {
    if spec.length == 0 {
        return Err(Error::param("spectrum length must be positive"));
    }
    check_param("scale", spec.scale, false)?;
    let n = spec.length;
    let values: Vec<f64> = match &spec.profile {
        &Profile::Knee {
            head_count,
            head_decay_rate,
            tail_exponent,
        } => {
            if head_count == 0 {
                return Err(Error::param("knee head_count must be positive"));
            }
            check_param("head_decay_rate", head_decay_rate, true)?;
            check_param("tail_exponent", tail_exponent, true)?;
            let last_head = (-head_decay_rate * (head_count - 1) as f64).exp();
            (0..n)
                .map(|i| {
                    if i < head_count {
                        (-head_decay_rate * i as f64).exp()
                    } else {
                        last_head * (head_count as f64 / (i + 1) as f64).powf(tail_exponent)
                    }
                })
                .collect()
        }
        &Profile::PowerLaw { exponent } => {
            check_param("exponent", exponent, true)?;
            (0..n).map(|i| ((i + 1) as f64).powf(-exponent)).collect()
        }
        &Profile::Exponential { rate } => {
            check_param("rate", rate, true)?;
            (0..n).map(|i| (-rate * i as f64).exp()).collect()
        }
        &Profile::Flat { value } => {
            check_param("value", value, false)?;
            vec![value; n]
        }
        Profile::Explicit { values } => {
            if values.len() != n {
                return Err(Error::param(format!(
                    "explicit spectrum has {} values but length is {n}",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    let values: Vec<f64> = values.into_iter().map(|v| v * spec.scale).collect();
    validate_spectrum(&values)?;
    Ok(values)
}

fn validate_spectrum(s: &[f64]) -> Result<()> {
    if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::param(format!(
            "singular value s[{i}] = {} is not finite and positive",
            s[i]
        )));
    }
    if let Some(i) = s.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::param(format!(
            "spectrum increases at index {}: {} > {}",
            i + 1,
            s[i + 1],
            s[i]
        )));
    }
    Ok(())
}

/// `W = U diag(s) Vᵀ` with `U`, `V` orthonormalized Gaussian draws.
///
/// One stream feeds `U` (rows x r) and then `V` (cols x r). The returned
/// factors are the exact SVD of `W`.
pub fn synth_matrix(
    spectrum: &[f64],
    rows: usize,
    cols: usize,
    seed: RngSeed,
) -> Result<(DenseMatrix, SvdFactors)> {
    let r = spectrum.len();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::param(format!(
            "spectrum length {r} must lie in [1, {}] for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    validate_spectrum(spectrum)?;
    let mut stream = GaussianStream::new(seed);
    let u = qr_orthonormalize(&stream.matrix(rows, r)?)?;
    let v = qr_orthonormalize(&stream.matrix(cols, r)?)?;
    let mut us = u.clone();
    us.scale_columns(spectrum);
    let w = us.matmul(&v.transpose())?;
    Ok((
        w,
        SvdFactors {
            u,
            s: spectrum.to_vec(),
            v,
        },
    ))
}
