//! End-to-end procedures: error-vs-q sweeps, whole-model compression,
//! matrix synthesis and bound checking. Timings use a monotonic clock
//! around the decomposition only.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_report;
use crate::matrix::{DenseMatrix, Difference, RngSeed};
use crate::norm::spectral_norm;
use crate::npy::{read_matrix, write_matrix, NpyDtype};
use crate::planner::{plan_model, CompressionPlan, ModelManifest};
use crate::randomized::{rsi, split_factors, truncate_svd, RsiConfig, ERROR_NORM_TOL};
use crate::softmax::{empirical_deviation, feature_radius, BoundReport};
use crate::spectra::{make_spectrum, synth_matrix, SpectrumSpec};
use crate::svd::exact_svd;

pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ranks: Vec<usize>,
    pub qs: Vec<usize>,
    pub trials: usize,
    pub seed: RngSeed,
    pub rel_tol: f64,
}

impl SweepConfig {
    pub fn new(ranks: Vec<usize>, qs: Vec<usize>, seed: RngSeed) -> Self {
        Self {
            ranks,
            qs,
            trials: DEFAULT_TRIALS,
            seed,
            rel_tol: ERROR_NORM_TOL,
        }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.ranks.is_empty() || self.qs.is_empty() {
            return Err(Error::param("ranks and qs must be non-empty"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        let max_rank = rows.min(cols);
        if let Some(k) = self.ranks.iter().find(|&&k| k == 0 || k > max_rank) {
            return Err(Error::param(format!(
                "rank {k} outside [1, {max_rank}] for a {rows}x{cols} matrix"
            )));
        }
        if self.qs.contains(&0) {
            return Err(Error::param("iteration counts must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::param(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// What the error columns of a sweep row hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// `‖W − W̃‖₂ / s_{k+1}`
    Normalized,
    /// `‖W − W̃‖₂`, used when `s_{k+1}` is zero to working precision.
    Raw,
}

impl ErrorMetric {
    fn as_str(self) -> &'static str {
        match self {
            ErrorMetric::Normalized => "normalized",
            ErrorMetric::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    /// Iteration count; 0 marks the truncated exact-SVD baseline.
    pub q: usize,
    pub mean_normalized_error: f64,
    pub std_normalized_error: f64,
    pub mean_wall_time_s: f64,
    pub metric: ErrorMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub exact_svd_time_s: f64,
    pub rows: Vec<SweepRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Error-vs-q sweep. The exact SVD is computed once and supplies the
/// reference values `s_{k+1}`. Rows are ordered by rank, then `q`, with
/// the `q = 0` baseline last for each rank. Trial `t` uses `seed ^ t`.
pub fn analyze(w: &DenseMatrix, config: &SweepConfig) -> Result<SweepResult> {
    config.validate(w.rows(), w.cols())?;
    let start = Instant::now();
    let full = exact_svd(w)?;
    let exact_svd_time_s = start.elapsed().as_secs_f64();

    // s_{k+1} below this counts as zero and the metric is undefined.
    let zero_floor = f64::EPSILON * w.rows().max(w.cols()) as f64 * full.s[0];
    let mut rows = Vec::new();
    for &k in &config.ranks {
        let reference = full.s.get(k).copied().unwrap_or(0.0);
        let (metric, denom) = if reference > zero_floor {
            (ErrorMetric::Normalized, reference)
        } else {
            (ErrorMetric::Raw, 1.0)
        };
        for &q in &config.qs {
            let mut errors = Vec::with_capacity(config.trials);
            let mut times = Vec::with_capacity(config.trials);
            for t in 0..config.trials {
                let cfg = RsiConfig::new(k, q, config.seed.trial(t as u64));
                let start = Instant::now();
                let f = rsi(w, &cfg)?;
                times.push(start.elapsed().as_secs_f64());
                let approx = split_factors(&f)?;
                errors.push(spectral_norm(&Difference::new(w, &approx)?, config.rel_tol)? / denom);
            }
            let (mean, std) = mean_std(&errors);
            rows.push(SweepRow {
                k,
                q,
                mean_normalized_error: mean,
                std_normalized_error: std,
                mean_wall_time_s: mean_std(&times).0,
                metric,
            });
        }
        let truncated = truncate_svd(&full, k)?;
        let baseline = spectral_norm(&Difference::new(w, &truncated)?, config.rel_tol)? / denom;
        rows.push(SweepRow {
            k,
            q: 0,
            mean_normalized_error: baseline,
            std_normalized_error: 0.0,
            mean_wall_time_s: exact_svd_time_s,
            metric,
        });
    }
    Ok(SweepResult {
        exact_svd_time_s,
        rows,
    })
}

/// CSV with a header row.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "k,q,mean_normalized_error,std_normalized_error,mean_wall_time_s,metric"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            r.q,
            r.mean_normalized_error,
            r.std_normalized_error,
            r.mean_wall_time_s,
            r.metric.as_str()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressOptions {
    pub alpha: f64,
    pub iterations: usize,
    pub seed: RngSeed,
    pub skip_if_larger: bool,
}

/// Plan plus the decomposition settings, as written to `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressReport {
    #[serde(flatten)]
    pub plan: CompressionPlan,
    pub q: usize,
    pub seed: RngSeed,
}

pub const PLAN_FILE: &str = "plan.json";

/// Removes everything a failed compression created.
struct Cleanup {
    created: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for p in self.created.iter().rev() {
                let _ = if p.is_dir() {
                    fs::remove_dir_all(p)
                } else {
                    fs::remove_file(p)
                };
            }
        }
    }
}

fn compress_layer(
    layer: &crate::planner::LayerSpec,
    k: usize,
    iterations: usize,
    seed: RngSeed,
    dir: &Path,
) -> Result<f64> {
    let path = layer
        .weight_path
        .as_ref()
        .ok_or_else(|| Error::param("weight_path is not set"))?;
    let w = read_matrix(path)?;
    if w.shape() != (layer.rows, layer.cols) {
        return Err(Error::InvalidData(format!(
            "weight file is {:?}, manifest says {:?}",
            w.shape(),
            (layer.rows, layer.cols)
        )));
    }
    let start = Instant::now();
    let f = rsi(&w, &RsiConfig::new(k, iterations, seed))?;
    let lr = split_factors(&f)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_matrix(dir.join("A.npy"), lr.a(), NpyDtype::F64)?;
    write_matrix(dir.join("B.npy"), lr.b(), NpyDtype::F64)?;
    Ok(elapsed)
}

/// Factorizes every linear layer of `manifest` and writes
/// `out_dir/<layer>/{A,B}.npy` plus `out_dir/plan.json`.
///
/// Layer `i` uses seed `seed ^ i`. Skipped layers get no files. On any
/// failure everything created so far is removed and the error names the
/// layer.
pub fn compress_model(
    manifest: &ModelManifest,
    opts: &CompressOptions,
    out_dir: &Path,
) -> Result<CompressReport> {
    let mut plan = plan_model(manifest, opts.alpha, opts.skip_if_larger)?;
    if opts.iterations == 0 {
        return Err(Error::param("iteration count q must be at least 1"));
    }
    let mut cleanup = Cleanup {
        created: Vec::new(),
        armed: true,
    };
    if !out_dir.exists() {
        fs::create_dir_all(out_dir)?;
        cleanup.created.push(out_dir.to_path_buf());
    }

    let mut total = 0.0;
    for (i, (layer, entry)) in manifest.layers.iter().zip(&mut plan.layers).enumerate() {
        if entry.skipped {
            continue;
        }
        let dir = out_dir.join(&layer.name);
        let result = (|| {
            if !dir.exists() {
                fs::create_dir(&dir)?;
                cleanup.created.push(dir.clone());
            } else {
                cleanup.created.push(dir.join("A.npy"));
                cleanup.created.push(dir.join("B.npy"));
            }
            compress_layer(layer, entry.k, opts.iterations, opts.seed.trial(i as u64), &dir)
        })();
        let elapsed = result.map_err(|e| Error::Layer {
            layer: layer.name.clone(),
            source: Box::new(e),
        })?;
        entry.wall_time_s = Some(elapsed);
        total += elapsed;
    }
    plan.totals.wall_time_s = Some(total);

    let report = CompressReport {
        plan,
        q: opts.iterations,
        seed: opts.seed,
    };
    let plan_path = out_dir.join(PLAN_FILE);
    cleanup.created.push(plan_path.clone());
    write_report(&report, &plan_path)?;
    cleanup.armed = false;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub rows: usize,
    pub cols: usize,
    pub seed: RngSeed,
    pub spectrum: SpectrumSpec,
    pub singular_values: Vec<f64>,
}

/// Path of the JSON sidecar written next to a synthesized matrix.
pub fn sidecar_path(npy_path: &Path) -> PathBuf {
    npy_path.with_extension("json")
}

/// Writes a synthetic matrix as NPY and its spectrum as a JSON sidecar.
pub fn synth_to_files(
    spec: &SpectrumSpec,
    rows: usize,
    cols: usize,
    seed: RngSeed,
    out: &Path,
) -> Result<SynthSidecar> {
    let s = make_spectrum(spec)?;
    let (w, _) = synth_matrix(&s, rows, cols, seed)?;
    let sidecar = SynthSidecar {
        rows,
        cols,
        seed,
        spectrum: spec.clone(),
        singular_values: s,
    };
    write_matrix(out, &w, NpyDtype::F64)?;
    write_report(&sidecar, sidecar_path(out))?;
    Ok(sidecar)
}

/// Bound check for factors `A B` against `W` over the rows of `features`.
/// `radius` defaults to the largest feature norm.
pub fn bound_check(
    w: &DenseMatrix,
    a: DenseMatrix,
    b: DenseMatrix,
    features: &DenseMatrix,
    bias: Option<&[f64]>,
    radius: Option<f64>,
) -> Result<BoundReport> {
    let approx = crate::randomized::LowRankFactors::new(a, b)?;
    let r = match radius {
        Some(r) => r,
        None => {
            let r = feature_radius(features);
            if r == 0.0 {
                return Err(Error::param("all features are zero; pass an explicit radius"));
            }
            r
        }
    };
    empirical_deviation(w, &approx, bias, features, r)
}
