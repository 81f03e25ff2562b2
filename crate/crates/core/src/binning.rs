//! Bin decomposition of depth and degradation-driven range adjustment.
//!
//! A stage discretises the current depth range at each pixel into `N`
//! uniform bins, takes the bin centres as depth candidates, and combines
//! them with a per-pixel probability distribution. The bin that encloses
//! the combined depth becomes the target bin; its interval is then widened
//! by `gamma * sigma(p)`, where `sigma(p)` is the local standard deviation
//! of the degradation map, and that widened interval is the range the next
//! round of binning works on.

use crate::error::{check_shape, Error, Result, Shape};
use crate::types::{
    BinIndexMap, BinPartition, CandidateVolume, DegradationMap, DepthMap, ProbabilityVolume,
};

/// Local mean, variance and standard deviation of a degradation map.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    pub height: usize,
    pub width: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Uniform partition over the image-wide valid `[min, max]` of `depth`,
/// broadcast to every pixel.
pub fn partition_uniform(depth: &DepthMap, n_bins: usize) -> Result<BinPartition> {
    if n_bins == 0 {
        return Err(Error::InvalidParam("n_bins must be at least 1".into()));
    }
    let (lo, hi) = depth.valid_range().ok_or(Error::NoValidPixels)?;
    BinPartition::broadcast(n_bins, depth.height(), depth.width(), lo, hi)
}

/// Uniform partition over an explicit per-pixel range.
pub fn partition_range(
    height: usize,
    width: usize,
    v_min: Vec<f64>,
    v_max: Vec<f64>,
    n_bins: usize,
) -> Result<BinPartition> {
    BinPartition::new(n_bins, height, width, v_min, v_max)
}

/// Bin centres `(u_n + u_{n+1}) / 2` for `n = 0..N`.
pub fn bin_centers(partition: &BinPartition) -> CandidateVolume {
    let n_bins = partition.n_bins();
    let stride = partition.height() * partition.width();
    let mut centers = vec![0.0; n_bins * stride];
    for p in 0..stride {
        let mut lower = partition.edge(0, p);
        for n in 0..n_bins {
            let upper = partition.edge(n + 1, p);
            centers[n * stride + p] = 0.5 * (lower + upper);
            lower = upper;
        }
    }
    CandidateVolume::new(n_bins, partition.height(), partition.width(), centers)
        .expect("centres of a valid partition are ordered and finite")
}

/// Probability-weighted sum of candidates, `X(p) = sum_n C_n(p) P_n(p)`.
///
/// The result is clamped to `[min_n C_n(p), max_n C_n(p)]` so rounding in
/// the sum never leaves the candidate hull. All output pixels are valid.
pub fn combine(centers: &CandidateVolume, probs: &ProbabilityVolume) -> Result<DepthMap> {
    check_shape(centers.shape(), probs.shape())?;
    let stride = centers.height() * centers.width();
    let values = (0..stride)
        .map(|p| {
            let mut acc = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for n in 0..centers.n_bins() {
                let c = centers.center(n, p);
                acc += c * probs.prob(n, p);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            acc.clamp(lo, hi)
        })
        .collect();
    DepthMap::from_values(centers.height(), centers.width(), values)
}

/// Index of the bin whose edges enclose `depth(p)`.
///
/// Depths on an interior edge go to the higher bin and `v_max` goes to bin
/// `N - 1`. Depths outside `[v_min, v_max]` are clamped into it and counted
/// in [`BinIndexMap::clamped_count`]; invalid pixels are located but never
/// counted.
pub fn locate_target_bin(partition: &BinPartition, depth: &DepthMap) -> Result<BinIndexMap> {
    check_shape(partition.shape(), depth.shape())?;
    let n_bins = partition.n_bins();
    let mut clamped = 0;
    let indices = depth
        .values()
        .iter()
        .zip(depth.valid_mask())
        .enumerate()
        .map(|(p, (&d, &valid))| {
            let lo = partition.v_min()[p];
            let hi = partition.v_max()[p];
            let d = if d.is_nan() { lo } else { d };
            if valid && (d < lo || d > hi) {
                clamped += 1;
            }
            let d = d.clamp(lo, hi);
            if d >= hi {
                return n_bins - 1;
            }
            let width = partition.bin_width(p);
            let mut n = ((d - lo) / width).floor();
            if !n.is_finite() || n < 0.0 {
                n = 0.0;
            }
            let mut n = (n as usize).min(n_bins - 1);
            // Settle rounding against the edges as actually computed.
            while n + 1 < n_bins && partition.edge(n + 1, p) <= d {
                n += 1;
            }
            while n > 0 && partition.edge(n, p) > d {
                n -= 1;
            }
            n
        })
        .collect();
    BinIndexMap::with_clamped(n_bins, partition.height(), partition.width(), indices, clamped)
}

/// Mean, population variance and standard deviation of `deg` over the
/// `k×k` window around each pixel. Windows at the border are truncated to
/// the pixels inside the image.
pub fn local_variance(deg: &DegradationMap, k: usize) -> Result<LocalStats> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("window size must be odd, got {k}")));
    }
    let (h, w) = (deg.height(), deg.width());
    let r = k / 2;
    let n = h * w;
    let mut mean = vec![0.0; n];
    let mut variance = vec![0.0; n];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            let count = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            let mut sum = 0.0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    sum += deg.get(yy, xx);
                }
            }
            let mu = sum / count;
            let mut sq = 0.0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    let d = deg.get(yy, xx) - mu;
                    sq += d * d;
                }
            }
            mean[y * w + x] = mu;
            variance[y * w + x] = sq / count;
        }
    }
    let sigma = variance.iter().map(|v| v.sqrt()).collect();
    Ok(LocalStats { height: h, width: w, mean, variance, sigma })
}

/// Widens each pixel's target bin to `[u_n - gamma*sigma, u_{n+1} + gamma*sigma]`,
/// with the lower bound clamped at zero.
pub fn adjust_range(
    partition: &BinPartition,
    target: &BinIndexMap,
    sigma: &[f64],
    gamma: f64,
) -> Result<BinPartition> {
    check_shape(partition.shape(), target.shape())?;
    if sigma.len() != partition.v_min().len() {
        return Err(Error::ShapeMismatch {
            expected: partition.shape(),
            found: Shape::hw(sigma.len() / partition.width().max(1), partition.width()),
        });
    }
    if target.n_bins() != partition.n_bins() {
        return Err(Error::InvalidParam(format!(
            "target map has {} bins, partition has {}",
            target.n_bins(),
            partition.n_bins()
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParam("gamma must be finite and non-negative".into()));
    }
    let stride = sigma.len();
    let mut v_min = Vec::with_capacity(stride);
    let mut v_max = Vec::with_capacity(stride);
    for (p, &s) in sigma.iter().enumerate() {
        let n = target.get(p);
        let tol = gamma * s;
        let lo = (partition.edge(n, p) - tol).max(0.0);
        let hi = (partition.edge(n + 1, p) + tol).max(lo);
        v_min.push(lo);
        v_max.push(hi);
    }
    BinPartition::new(partition.n_bins(), partition.height(), partition.width(), v_min, v_max)
}
