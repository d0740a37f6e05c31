//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rsi_core::spectra::SpectrumSpec;
use rsi_core::DenseMatrix;
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// in descending order.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(sym: &DenseMatrix) -> Vec<f64> {
    let n = sym.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| sym.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// `(W Wᵀ)^{q−1} W ω` with no orthonormalization.
pub fn raw_power_iterate(w: &DenseMatrix, omega: &[f64], q: usize) -> Vec<f64> {
    let mut x = w.matvec(omega).unwrap();
    for _ in 1..q {
        let y = w.t_matvec(&x).unwrap();
        x = w.matvec(&y).unwrap();
    }
    x
}

/// SplitMix64, for drawing test dimensions.
pub struct Dims(pub u64);

impl Dims {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next() % (hi - lo + 1) as u64) as usize
    }

    /// Uniform real in `[lo, hi)`.
    pub fn real(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[derive(Debug, Deserialize)]
pub struct KneeTargets {
    pub q1_mean_at_least: f64,
    pub q4_mean_at_most: f64,
    pub monotone_slack: f64,
}

#[derive(Debug, Deserialize)]
pub struct KneeFixture {
    pub rows: usize,
    pub cols: usize,
    pub spectrum: SpectrumSpec,
    pub matrix_seed: u64,
    pub sweep_seed: u64,
    pub rank: usize,
    pub trials: usize,
    pub iterations: Vec<usize>,
    pub targets: KneeTargets,
}

pub fn knee_fixture() -> KneeFixture {
    let text = std::fs::read_to_string(fixture("knee_256x512.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Strips every `wall_time_s` key from a JSON document.
pub fn without_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("wall_time_s");
            map.values_mut().for_each(without_timings);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(without_timings),
        _ => {}
    }
}
