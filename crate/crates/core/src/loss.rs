//! Training losses and evaluation metrics.
//!
//! All reductions skip pixels that are invalid in either map and use
//! pairwise summation so results do not depend on thread scheduling.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::types::{CandidateVolume, DepthMap, HyperParams};

/// Largest candidate set fed to the Chamfer term.
pub const MAX_CANDIDATES: usize = 4096;

/// Base of the accuracy thresholds `1.05^i`.
pub const DELTA_BASE: f64 = 1.05;

/// Pairwise (tree) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

fn joint_valid(pred: &DepthMap, gt: &DepthMap) -> Result<Vec<usize>> {
    check_shape(gt.shape(), pred.shape())?;
    let idx: Vec<usize> = (0..gt.len())
        .filter(|&p| pred.valid_mask()[p] && gt.valid_mask()[p])
        .collect();
    if idx.is_empty() {
        return Err(Error::NoValidPixels);
    }
    Ok(idx)
}

/// Mean absolute error over jointly valid pixels.
pub fn l1_rec(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    let idx = joint_valid(pred, gt)?;
    let abs: Vec<f64> = idx.iter().map(|&p| (pred.values()[p] - gt.values()[p]).abs()).collect();
    Ok(pairwise_sum(&abs) / abs.len() as f64)
}

/// Squared distance from each query to its nearest neighbour in `sorted`.
fn nearest_sq(sorted: &[f64], queries: &[f64]) -> Vec<f64> {
    queries
        .iter()
        .map(|&q| {
            let i = sorted.partition_point(|&v| v < q);
            let mut best = f64::INFINITY;
            if i < sorted.len() {
                best = best.min((sorted[i] - q).powi(2));
            }
            if i > 0 {
                best = best.min((sorted[i - 1] - q).powi(2));
            }
            best
        })
        .collect()
}

/// Bi-directional Chamfer distance between two sets of scalars:
/// `sum_z min_c (c - z)^2 + sum_c min_z (c - z)^2`.
pub fn chamfer_bins(centers: &[f64], gt_values: &[f64]) -> Result<f64> {
    if centers.is_empty() || gt_values.is_empty() {
        return Err(Error::EmptySet);
    }
    if centers.iter().chain(gt_values).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("chamfer inputs must be finite".into()));
    }
    let mut c = centers.to_vec();
    let mut z = gt_values.to_vec();
    c.sort_by(f64::total_cmp);
    z.sort_by(f64::total_cmp);
    Ok(pairwise_sum(&nearest_sq(&c, gt_values)) + pairwise_sum(&nearest_sq(&z, centers)))
}

/// Mean Chamfer distance over a batch of `(centers, gt)` pairs.
pub fn chamfer_bins_batch(batch: &[(&[f64], &[f64])]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptySet);
    }
    let per: Vec<f64> = batch.iter().map(|(c, z)| chamfer_bins(c, z)).collect::<Result<_>>()?;
    Ok(pairwise_sum(&per) / per.len() as f64)
}

/// Union of bin centres over the pixels valid in `mask`, uniformly
/// subsampled without replacement to at most [`MAX_CANDIDATES`].
pub fn candidate_set(centers: &CandidateVolume, mask: &[bool], seed: u64) -> Result<Vec<f64>> {
    let stride = centers.height() * centers.width();
    if mask.len() != stride {
        return Err(Error::InvalidParam(format!(
            "mask has {} pixels, candidates have {stride}",
            mask.len()
        )));
    }
    let all: Vec<f64> = (0..centers.n_bins())
        .flat_map(|n| (0..stride).filter(|&p| mask[p]).map(move |p| (n, p)))
        .map(|(n, p)| centers.center(n, p))
        .collect();
    if all.len() <= MAX_CANDIDATES {
        return Ok(all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, all.len(), MAX_CANDIDATES).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| all[i]).collect())
}

/// Valid ground-truth depths.
pub fn gt_set(gt: &DepthMap) -> Vec<f64> {
    gt.values().iter().zip(gt.valid_mask()).filter(|(_, &ok)| ok).map(|(&v, _)| v).collect()
}

/// `rec + alpha * bin`.
pub fn combine_losses(rec: f64, bin: f64, alpha: f64) -> f64 {
    rec + alpha * bin
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub rec: f64,
    pub bin: f64,
    pub total: f64,
}

/// Reconstruction and bin losses for one image.
pub fn loss_terms(pred: &DepthMap, gt: &DepthMap, centers: &CandidateVolume, hp: &HyperParams) -> Result<LossTerms> {
    check_shape(gt.shape(), crate::error::Shape::hw(centers.height(), centers.width()))?;
    let rec = l1_rec(pred, gt)?;
    let cands = candidate_set(centers, gt.valid_mask(), hp.seed)?;
    let bin = chamfer_bins(&cands, &gt_set(gt))?;
    Ok(LossTerms { rec, bin, total: combine_losses(rec, bin, hp.alpha) })
}

/// `L_rec + alpha * L_bin` with `alpha = hp.alpha`.
pub fn total_loss(pred: &DepthMap, gt: &DepthMap, centers: &CandidateVolume, hp: &HyperParams) -> Result<f64> {
    Ok(loss_terms(pred, gt, centers, hp)?.total)
}

/// Error and accuracy summary of a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub valid_pixels: usize,
}

impl MetricReport {
    pub fn delta(&self, i: usize) -> f64 {
        match i {
            1 => self.delta1,
            2 => self.delta2,
            3 => self.delta3,
            _ => panic!("delta index must be 1..=3"),
        }
    }

    /// Single-line JSON record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("plain struct serialises")
    }
}

/// RMSE and MAE over jointly valid pixels; `delta_i` is the percentage of
/// those pixels with strictly positive depth in both maps whose ratio
/// `max(Z/X, X/Z)` is below `1.05^i`.
pub fn metrics(pred: &DepthMap, gt: &DepthMap) -> Result<MetricReport> {
    let idx = joint_valid(pred, gt)?;
    let m = idx.len() as f64;
    let (mut abs, mut sq) = (Vec::with_capacity(idx.len()), Vec::with_capacity(idx.len()));
    let mut hits = [0usize; 3];
    let mut ratio_pixels = 0usize;
    for &p in &idx {
        let (x, z) = (pred.values()[p], gt.values()[p]);
        let e = x - z;
        abs.push(e.abs());
        sq.push(e * e);
        if x > 0.0 && z > 0.0 {
            ratio_pixels += 1;
            let r = (z / x).max(x / z);
            for (i, hit) in hits.iter_mut().enumerate() {
                if r < DELTA_BASE.powi(i as i32 + 1) {
                    *hit += 1;
                }
            }
        }
    }
    let mae = pairwise_sum(&abs) / m;
    // Cauchy-Schwarz; the max only absorbs rounding when all errors are equal.
    let rmse = (pairwise_sum(&sq) / m).sqrt().max(mae);
    let pct = |h: usize| if ratio_pixels == 0 { 0.0 } else { 100.0 * h as f64 / ratio_pixels as f64 };
    Ok(MetricReport {
        rmse,
        mae,
        delta1: pct(hits[0]),
        delta2: pct(hits[1]),
        delta3: pct(hits[2]),
        valid_pixels: idx.len(),
    })
}
