//! Depth formats, colour images, error heatmaps and the tensor container,
//! including a refine run driven by features loaded from a file.
//!
//! Usage: `cargo run --example io_formats [OUT_DIR]`

use std::path::PathBuf;

use depthbins::degrade::{bicubic_resample, make_lr, DegradeSpec};
use depthbins::io::{
    read_depth, read_tensors, weights_from_tensors, weights_to_tensors, write_color, write_depth,
    write_error_heatmap, write_tensors, ProviderKind, RunConfig, Tensor,
};
use depthbins::probhead::ProbHeadWeights;
use depthbins::{DepthMap, FeatureMap, HyperParams};

fn main() -> depthbins::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("depthbins-io-example"));
    std::fs::create_dir_all(&dir)?;

    let gt = DepthMap::from_fn(32, 32, |y, x| if (x / 8 + y / 8) % 2 == 0 { 120.0 } else { 180.5 })?;
    for ext in ["raw", "pfm", "pgm"] {
        let path = dir.join(format!("gt.{ext}"));
        write_depth(&gt, &path)?;
        let back = read_depth(&path)?;
        let max_err = back.values().iter().zip(gt.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{ext}: {} bytes, max round-trip error {max_err:e}", std::fs::metadata(&path)?.len());
    }

    let color = FeatureMap::new(3, 32, 32, (0..3 * 1024).map(|i| (i % 32) as f64 / 31.0).collect())?;
    write_color(&color, dir.join("color.ppm"))?;

    let lr = make_lr(&gt, &DegradeSpec { scale: 4.0, ..Default::default() })?;
    let up = bicubic_resample(&lr, 32, 32)?;
    write_error_heatmap(&up, &gt, dir.join("bicubic_error.ppm"))?;

    // Stage weights survive a round trip through the tensor container.
    let hp = HyperParams { n_bins: 8, n_stages: 2, hidden_channels: 4, ..Default::default() };
    let ctx = 3;
    let stages: Vec<_> = (0..hp.n_stages).map(|i| ProbHeadWeights::seeded(8, 4, ctx, i as u64)).collect();
    write_tensors(&weights_to_tensors(&stages), dir.join("weights.dgbw"))?;
    let loaded = weights_from_tensors(&read_tensors(dir.join("weights.dgbw"))?, hp.n_stages)?;
    println!("weights round trip exact: {}", loaded == stages);

    // Precomputed features: context (2 channels) and four 1-channel layers,
    // so each stage sees 3 context channels, matching the weights above.
    let mut feats = vec![Tensor::new("context", vec![2, 32, 32], (0..2048).map(|i| (i % 5) as f64 * 0.1).collect())?];
    for i in 0..4 {
        feats.push(Tensor::new(format!("layer{i}"), vec![1, 32, 32], vec![0.1 * i as f64; 1024])?);
    }
    feats.push(Tensor::new("initial_depth", vec![32, 32], up.values().to_vec())?);
    write_tensors(&feats, dir.join("features.dgbw"))?;

    let cfg = RunConfig {
        hyper: hp,
        provider: ProviderKind::ExternalFile,
        features: Some(dir.join("features.dgbw")),
        weights: Some(dir.join("weights.dgbw")),
        ..Default::default()
    };
    let (out, _) = cfg.run(&color, &lr)?;
    write_depth(&out, dir.join("refined.pfm"))?;
    println!("wrote files to {}", dir.display());
    Ok(())
}
