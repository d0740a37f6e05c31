mod common;

use std::fs;

use common::{fixture, knee_fixture};
use rsi_core::io::read_manifest;
use rsi_core::npy;
use rsi_core::planner::plan_model;
use rsi_core::spectra::make_spectrum;

/// Parameter count of the standard VGG19 feature extractor, summed layer
/// by layer (3x3 convolutions with bias).
fn vgg19_conv_params() -> u64 {
    let cfg = [64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512, 0];
    let mut channels = 3u64;
    let mut total = 0;
    for &out in cfg.iter().filter(|&&c| c != 0) {
        total += channels * out * 9 + out;
        channels = out;
    }
    total
}

#[test]
fn vgg19_manifest_matches_architecture() {
    let m = read_manifest(fixture("vgg19.json")).unwrap();
    assert_eq!(m.fixed_params, vgg19_conv_params());
    assert_eq!(m.total_params(), 143_667_240);
    let dims: Vec<_> = m.layers.iter().map(|l| (l.rows, l.cols, l.has_bias)).collect();
    assert_eq!(dims, vec![(4096, 25088, true), (4096, 4096, true), (1000, 4096, true)]);

    let ratios: Vec<f64> = [0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|&a| plan_model(&m, a, false).unwrap().totals.ratio)
        .collect();
    for (got, want) in ratios.iter().zip([0.36, 0.58, 0.80, 1.02]) {
        assert!((got - want).abs() <= 0.01, "{ratios:?}");
    }
    // At alpha = 0.8 only the square 4096x4096 layer grows; skipping it caps the ratio.
    let skipped = plan_model(&m, 0.8, true).unwrap();
    assert!(skipped.totals.ratio <= 1.0);
    assert_eq!(skipped.layers.iter().filter(|e| e.skipped).count(), 1);
    assert!(skipped.layers[1].skipped);
}

/// ViT-B/32 in the torchvision layout: the fused attention input projection
/// is not a separate linear module and is counted as fixed.
#[test]
fn vit_b_32_manifest_inventory() {
    let m = read_manifest(fixture("vit_b_32.json")).unwrap();
    assert_eq!(m.layers.len(), 37);
    assert_eq!(m.total_params(), 88_224_232);
    let d = 768u64;
    let patch = d * 3 * 32 * 32 + d;
    let tokens = d + 50 * d;
    let per_block_fixed = 2 * d + (3 * d * d + 3 * d) + 2 * d;
    assert_eq!(m.fixed_params, patch + tokens + 12 * per_block_fixed + 2 * d);

    let ratio = |a| plan_model(&m, a, false).unwrap().totals.ratio;
    assert!(ratio(0.2) < ratio(0.4) && ratio(0.4) < ratio(0.6) && ratio(0.6) < ratio(0.8));
}

#[test]
fn toy_manifest_loads_with_resolved_paths() {
    let m = read_manifest(fixture("toy/manifest.json")).unwrap();
    for layer in &m.layers {
        let w = npy::read_matrix(layer.weight_path.as_ref().unwrap()).unwrap();
        assert_eq!(w.shape(), (layer.rows, layer.cols));
        if let Some(b) = &layer.bias_path {
            assert_eq!(npy::read_vector(b).unwrap().len(), layer.rows);
        }
    }
}

#[test]
fn knee_fixture_is_consistent() {
    let fx = knee_fixture();
    let s = make_spectrum(&fx.spectrum).unwrap();
    assert_eq!(s.len(), fx.rows.min(fx.cols));
    assert!(fx.rank < s.len());
    assert!(fx.trials >= 20);
    let raw: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("knee_256x512.json")).unwrap()).unwrap();
    assert_eq!(raw["calibration_means"].as_array().unwrap().len(), fx.iterations.len());
}
