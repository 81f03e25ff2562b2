//! Runs a seeded probability head over random candidates and prints the
//! per-pixel distribution statistics.

use depthbins::binning::{bin_centers, partition_range};
use depthbins::probhead::ProbHeadWeights;
use depthbins::{DegradationMap, FeatureMap, Validate};

fn main() -> depthbins::Result<()> {
    let (n_bins, hidden, context, h, w) = (16, 8, 6, 12, 12);
    let part = partition_range(h, w, vec![50.0; h * w], vec![90.0; h * w], n_bins)?;
    let centers = bin_centers(&part);

    let feats = FeatureMap::new(context, h, w, (0..context * h * w).map(|i| ((i * 37) % 11) as f64 / 11.0).collect())?;
    let deg = DegradationMap::new(h, w, (0..h * w).map(|p| if p % w > w / 2 { 2.0 } else { 0.2 }).collect())?;

    let head = ProbHeadWeights::seeded(n_bins, hidden, context, 7);
    let probs = head.estimate(&centers, &feats, &deg)?;
    probs.validate()?;

    let entropy = probs.entropy();
    let max_entropy = (n_bins as f64).ln();
    let mean = entropy.iter().sum::<f64>() / entropy.len() as f64;
    println!("{n_bins} bins, {}x{} pixels", h, w);
    println!("mean entropy {mean:.4} of at most {max_entropy:.4}");
    for p in [0, h * w / 2 + w - 1] {
        let row: Vec<String> = (0..n_bins).map(|n| format!("{:.3}", probs.prob(n, p))).collect();
        println!("pixel {p:>3}: [{}]", row.join(", "));
    }

    let zeros = ProbHeadWeights::zeros(n_bins, hidden, context);
    let flat = zeros.estimate(&centers, &feats, &deg)?;
    println!("zero weights give uniform probabilities: {}", flat.probs().iter().all(|&v| v == 1.0 / n_bins as f64));
    Ok(())
}
