//! WebAssembly bindings behind `www/index.html`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so the
//! logic can be tested natively.

use rsi_core::softmax::{empirical_deviation, BoundReport};
use rsi_core::spectra::{make_spectrum, synth_matrix, SpectrumSpec};
use rsi_core::{
    normalized_spectral_error, rsi, split_factors, DenseMatrix, RngSeed, RsiConfig,
};
use rsi_core::matrix::GaussianStream;
use wasm_bindgen::prelude::*;

/// Looser than the CLI default; the page trades digits for latency.
const DEMO_NORM_TOL: f64 = 1e-4;

fn parse_spec(spec_json: &str) -> Result<SpectrumSpec, String> {
    serde_json::from_str(spec_json).map_err(|e| format!("bad spectrum: {e}"))
}

pub fn spectrum_values(spec_json: &str) -> Result<Vec<f64>, String> {
    make_spectrum(&parse_spec(spec_json)?).map_err(|e| e.to_string())
}

/// Mean normalized error for `q = 1..=max_q` on one synthetic matrix.
pub fn mean_error_by_q(
    spec_json: &str,
    rows: usize,
    cols: usize,
    rank: usize,
    max_q: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let spectrum = spectrum_values(spec_json)?;
    if rank >= spectrum.len() {
        return Err(format!("rank must be below the spectrum length {}", spectrum.len()));
    }
    if max_q == 0 || trials == 0 {
        return Err("max_q and trials must be positive".into());
    }
    let (w, _) = synth_matrix(&spectrum, rows, cols, RngSeed(seed)).map_err(|e| e.to_string())?;
    let reference = spectrum[rank];
    let base = RngSeed(seed.wrapping_add(1));
    (1..=max_q)
        .map(|q| {
            let mut total = 0.0;
            for t in 0..trials as u64 {
                let f = rsi(&w, &RsiConfig::new(rank, q, base.trial(t))).map_err(|e| e.to_string())?;
                let lr = split_factors(&f).map_err(|e| e.to_string())?;
                let r = normalized_spectral_error(&w, &lr, reference, DEMO_NORM_TOL)
                    .map_err(|e| e.to_string())?;
                total += r.normalized_error;
            }
            Ok(total / trials as f64)
        })
        .collect()
}

/// Gaussian directions rescaled to norm `radius`.
fn sphere_features(n: usize, d: usize, radius: f64, seed: RngSeed) -> Result<DenseMatrix, String> {
    let mut h = GaussianStream::new(seed).matrix(n, d).map_err(|e| e.to_string())?;
    for i in 0..n {
        let row = h.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v *= radius / norm);
    }
    Ok(h)
}

/// Compresses a synthetic `classes x dim` head to rank `rank` and measures
/// the softmax deviation on `samples` features of norm `radius`.
#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    spec_json: &str,
    classes: usize,
    dim: usize,
    rank: usize,
    q: usize,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<BoundReport, String> {
    let spectrum = spectrum_values(spec_json)?;
    let (w, _) = synth_matrix(&spectrum, classes, dim, RngSeed(seed)).map_err(|e| e.to_string())?;
    let f = rsi(&w, &RsiConfig::new(rank, q, RngSeed(seed ^ 1))).map_err(|e| e.to_string())?;
    let lr = split_factors(&f).map_err(|e| e.to_string())?;
    let h = sphere_features(samples, dim, radius, RngSeed(seed ^ 2))?;
    empirical_deviation(&w, &lr, None, &h, radius).map_err(|e| e.to_string())
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = spectrum)]
pub fn spectrum_js(spec_json: &str) -> Result<Vec<f64>, JsError> {
    spectrum_values(spec_json).map_err(js)
}

#[wasm_bindgen(js_name = errorByQ)]
pub fn error_by_q_js(
    spec_json: &str,
    rows: usize,
    cols: usize,
    rank: usize,
    max_q: usize,
    trials: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    mean_error_by_q(spec_json, rows, cols, rank, max_q, trials, seed.into()).map_err(js)
}

/// Returns the report as JSON text.
#[wasm_bindgen(js_name = softmaxBound)]
#[allow(clippy::too_many_arguments)]
pub fn softmax_bound_js(
    spec_json: &str,
    classes: usize,
    dim: usize,
    rank: usize,
    q: usize,
    samples: usize,
    radius: f64,
    seed: u32,
) -> Result<String, JsError> {
    let report = bound_report(spec_json, classes, dim, rank, q, samples, radius, seed.into()).map_err(js)?;
    serde_json::to_string(&report).map_err(|e| js(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KNEE: &str = r#"{"profile":{"kind":"knee","head_count":8,"head_decay_rate":0.2,"tail_exponent":0.5},"length":48}"#;

    #[test]
    fn spectrum_is_sorted_and_sized() {
        let s = spectrum_values(KNEE).unwrap();
        assert_eq!(s.len(), 48);
        assert!(s.windows(2).all(|p| p[1] <= p[0]));
        assert!(spectrum_values("{").is_err());
    }

    #[test]
    fn error_curve_is_at_least_one_and_decreasing() {
        let curve = mean_error_by_q(KNEE, 48, 64, 10, 3, 4, 3).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve.iter().all(|&e| e >= 1.0 - 1e-3), "{curve:?}");
        assert!(curve[2] < curve[0], "{curve:?}");
        assert!(mean_error_by_q(KNEE, 48, 64, 48, 1, 1, 0).is_err());
    }

    #[test]
    fn bound_holds_in_demo_setting() {
        let spec = KNEE.replace("48", "20");
        let r = bound_report(&spec, 20, 48, 5, 2, 200, 3.0, 11).unwrap();
        assert_eq!(r.samples_tested, 200);
        assert!(r.empirical_max_dev <= r.theoretical_bound);
        assert!(r.theoretical_bound > 0.0);
    }

    #[test]
    fn sphere_features_have_requested_norm() {
        let h = sphere_features(5, 7, 2.5, RngSeed(1)).unwrap();
        for i in 0..5 {
            let n = h.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 2.5).abs() < 1e-12);
        }
    }
}
