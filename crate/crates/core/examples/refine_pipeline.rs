//! Full pipeline on a synthetic scene: simulate an LR observation, refine it
//! with the small encoder, and report per-stage accuracy.
//!
//! Usage: `cargo run --release --example refine_pipeline [OUT_DIR]`

use std::path::PathBuf;

use depthbins::degrade::{bicubic_resample, make_lr, DegradeSpec};
use depthbins::io::{write_depth, write_error_heatmap, RunConfig};
use depthbins::loss::metrics;
use depthbins::{DepthMap, FeatureMap};

fn scene(h: usize, w: usize) -> (DepthMap, FeatureMap) {
    let gt = DepthMap::from_fn(h, w, |y, x| {
        let (fy, fx) = (y as f64, x as f64);
        if (fy - 0.6 * h as f64).powi(2) + (fx - 0.3 * w as f64).powi(2) < (0.15 * h as f64).powi(2) {
            80.0
        } else {
            200.0 - 0.8 * fy + 0.3 * fx
        }
    })
    .expect("finite scene");
    let plane = h * w;
    let mut rgb = vec![0.0; 3 * plane];
    for p in 0..plane {
        let d = gt.values()[p] / 250.0;
        rgb[p] = d;
        rgb[plane + p] = 0.5;
        rgb[2 * plane + p] = 1.0 - d;
    }
    (gt, FeatureMap::new(3, h, w, rgb).expect("finite colour"))
}

fn main() -> depthbins::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let (gt, color) = scene(64, 64);
    let lr = make_lr(&gt, &DegradeSpec::noisy(4.0, 1))?;

    let baseline = bicubic_resample(&lr, 64, 64)?;
    let m = metrics(&baseline, &gt)?;
    println!("bicubic     rmse {:7.3}  mae {:7.3}  d1 {:5.1}", m.rmse, m.mae, m.delta1);

    let cfg = RunConfig::default();
    let (out, trace) = cfg.run(&color, &lr)?;
    for (i, (d, part)) in trace.per_stage_depths.iter().zip(&trace.per_stage_partitions).enumerate() {
        let m = metrics(d, &gt)?;
        let mean_width = (0..d.len()).map(|p| part.range_width(p)).sum::<f64>() / d.len() as f64;
        println!(
            "stage {}     rmse {:7.3}  mae {:7.3}  d1 {:5.1}  mean range {:.4}",
            i + 1,
            m.rmse,
            m.mae,
            m.delta1,
            mean_width
        );
    }
    println!("(seeded, untrained weights: the numbers show the mechanics, not accuracy)");

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir)?;
        write_depth(&gt, dir.join("gt.pfm"))?;
        write_depth(&lr, dir.join("lr.pfm"))?;
        write_depth(&out, dir.join("refined.pfm"))?;
        write_error_heatmap(&out, &gt, dir.join("error.ppm"))?;
        println!("wrote outputs to {}", dir.display());
    }
    Ok(())
}
