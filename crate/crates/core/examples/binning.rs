//! Bin algebra on a single pixel: partition, centres, weighted combination,
//! target-bin lookup and degradation-driven range adjustment.

use depthbins::binning::{adjust_range, bin_centers, combine, local_variance, locate_target_bin, partition_range};
use depthbins::{DegradationMap, ProbabilityVolume};

fn main() -> depthbins::Result<()> {
    let part = partition_range(1, 1, vec![100.0], vec![110.0], 8)?;
    println!("edges:   {:?}", part.edges(0));

    let centers = bin_centers(&part);
    println!("centres: {:?}", centers.pixel(0).collect::<Vec<_>>());

    // Most of the mass on bins 2 and 3.
    let probs = ProbabilityVolume::new(8, 1, 1, vec![0.0, 0.05, 0.6, 0.3, 0.05, 0.0, 0.0, 0.0])?;
    let x = combine(&centers, &probs)?;
    let target = locate_target_bin(&part, &x)?;
    println!("combined depth {:.4} lies in bin {}", x.get(0, 0), target.get(0));

    // Widen the target bin by gamma times the local spread of degradation.
    let deg = DegradationMap::new(3, 3, vec![0.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 0.0])?;
    let stats = local_variance(&deg, 3)?;
    let sigma = stats.sigma[4];
    for gamma in [0.0, 0.2, 1.0] {
        let adjusted = adjust_range(&part, &target, &[sigma], gamma)?;
        println!(
            "gamma {gamma:>3}: sigma {sigma:.3} -> range [{:.4}, {:.4}]",
            adjusted.v_min()[0],
            adjusted.v_max()[0]
        );
    }
    Ok(())
}
