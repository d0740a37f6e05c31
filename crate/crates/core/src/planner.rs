//! Rank selection and parameter accounting for whole models.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One linear layer `y = W x (+ b)` with `W` of shape `rows x cols` (C x D).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub has_bias: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_path: Option<PathBuf>,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, has_bias: bool) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            has_bias,
            weight_path: None,
            bias_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub model_name: String,
    /// Parameters that are never factorized (convolutions, embeddings, norms).
    pub fixed_params: u64,
    pub layers: Vec<LayerSpec>,
}

impl ModelManifest {
    /// Checks dimensions and name uniqueness. Layer names become directory
    /// names on output, so path separators and `.`/`..` are refused.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let field = |f: &str| format!("layers[{i}].{f}");
            let bad_name = layer.name.is_empty()
                || layer.name == "."
                || layer.name == ".."
                || layer.name.contains(['/', '\\', '\0']);
            if bad_name {
                return Err(Error::Schema {
                    field: field("name"),
                    message: format!("{:?} is not usable as a directory name", layer.name),
                });
            }
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::Schema {
                    field: field("name"),
                    message: format!("duplicate layer name {:?}", layer.name),
                });
            }
            if layer.rows == 0 {
                return Err(Error::Schema {
                    field: field("rows"),
                    message: "must be at least 1".into(),
                });
            }
            if layer.cols == 0 {
                return Err(Error::Schema {
                    field: field("cols"),
                    message: "must be at least 1".into(),
                });
            }
        }
        Ok(())
    }

    /// Total parameter count before compression.
    pub fn total_params(&self) -> u64 {
        self.fixed_params
            + self
                .layers
                .iter()
                .map(|l| l.rows as u64 * l.cols as u64 + if l.has_bias { l.rows as u64 } else { 0 })
                .sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub params_before: u64,
    pub params_after: u64,
    pub skipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTotals {
    pub original_params: u64,
    pub compressed_params: u64,
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlan {
    pub model_name: String,
    pub alpha: f64,
    pub skip_if_larger: bool,
    pub layers: Vec<PlanEntry>,
    pub totals: PlanTotals,
}

/// `k = ⌈α·min(C, D)⌉`, at least 1.
///
/// Products within `1e-9` (relative) of an integer are taken as that
/// integer, so `0.7 · 10` gives 7 rather than 8.
pub fn rank_for_alpha(rows: usize, cols: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::param(format!("layer shape {rows}x{cols} has a zero dimension")));
    }
    let product = alpha * rows.min(cols) as f64;
    let nearest = product.round();
    let k = if (product - nearest).abs() <= 1e-9 * product.max(1.0) {
        nearest
    } else {
        product.ceil()
    };
    Ok((k as usize).max(1))
}

/// `(before, after)` parameter counts of a layer factorized at rank `k`.
/// The bias (length C) is counted in both and never compressed.
pub fn layer_param_counts(layer: &LayerSpec, k: usize) -> Result<(u64, u64)> {
    let max_rank = layer.rows.min(layer.cols);
    if k == 0 || k > max_rank {
        return Err(Error::param(format!(
            "rank {k} outside [1, {max_rank}] for layer {:?}",
            layer.name
        )));
    }
    let (c, d) = (layer.rows as u64, layer.cols as u64);
    let bias = if layer.has_bias { c } else { 0 };
    Ok((c * d + bias, (c + d) * k as u64 + bias))
}

/// Applies the rank rule to every layer and totals the model.
///
/// With `skip_if_larger`, layers whose factorization would not shrink them
/// are left dense.
pub fn plan_model(manifest: &ModelManifest, alpha: f64, skip_if_larger: bool) -> Result<CompressionPlan> {
    manifest.validate()?;
    let mut layers = Vec::with_capacity(manifest.layers.len());
    let mut original = manifest.fixed_params;
    let mut compressed = manifest.fixed_params;
    for layer in &manifest.layers {
        let k = rank_for_alpha(layer.rows, layer.cols, alpha)?;
        let (before, after) = layer_param_counts(layer, k)?;
        let skipped = skip_if_larger && after >= before;
        let kept = if skipped { before } else { after };
        original += before;
        compressed += kept;
        layers.push(PlanEntry {
            name: layer.name.clone(),
            rows: layer.rows,
            cols: layer.cols,
            k,
            params_before: before,
            params_after: kept,
            skipped,
            wall_time_s: None,
        });
    }
    let ratio = if original == 0 {
        1.0
    } else {
        compressed as f64 / original as f64
    };
    Ok(CompressionPlan {
        model_name: manifest.model_name.clone(),
        alpha,
        skip_if_larger,
        layers,
        totals: PlanTotals {
            original_params: original,
            compressed_params: compressed,
            ratio,
            wall_time_s: None,
        },
    })
}
