//! Analytic gradient of the logits -> softmax -> weighted combination -> L1
//! path, and a central finite-difference checker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::probhead::softmax_channels;
use crate::types::{CandidateVolume, DepthMap, FeatureMap};

/// Outcome of comparing analytic and numeric gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_params_checked: usize,
    pub step: f64,
}

impl GradReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("plain struct serialises")
    }

    /// Worst case over two reports.
    pub fn merge(self, other: GradReport) -> GradReport {
        GradReport {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            n_params_checked: self.n_params_checked + other.n_params_checked,
            step: self.step,
        }
    }
}

fn check_inputs(logits: &FeatureMap, centers: &CandidateVolume, gt: &DepthMap) -> Result<()> {
    check_shape(centers.shape(), logits.shape())?;
    check_shape(gt.shape(), logits.spatial_shape())
}

/// Unclamped `sum_n C_n softmax(logits)_n` per pixel, with the probabilities.
fn soft_combine(logits: &FeatureMap, centers: &CandidateVolume) -> (Vec<f64>, Vec<f64>) {
    let probs = softmax_channels(logits);
    let plane = logits.plane_len();
    let x = (0..plane)
        .map(|p| (0..logits.channels()).map(|n| centers.center(n, p) * probs[n * plane + p]).sum())
        .collect();
    (x, probs)
}

/// `(1/m) sum_p |X(p) - Z(p)|` over valid ground-truth pixels, where `X` is
/// the softmax-weighted combination of `centers`.
pub fn combine_l1_loss(logits: &FeatureMap, centers: &CandidateVolume, gt: &DepthMap) -> Result<f64> {
    check_inputs(logits, centers, gt)?;
    let m = gt.valid_count();
    if m == 0 {
        return Err(Error::NoValidPixels);
    }
    let (x, _) = soft_combine(logits, centers);
    let sum: f64 = x
        .iter()
        .zip(gt.values())
        .zip(gt.valid_mask())
        .filter(|(_, &ok)| ok)
        .map(|((a, b), _)| (a - b).abs())
        .sum();
    Ok(sum / m as f64)
}

/// `dL/dlogit_n(p) = (1/m) sign(X - Z) P_n (C_n - X)`, with `sign(0) = 0`
/// and zero gradient at invalid pixels. Layout matches `logits`.
pub fn grad_combine_l1(logits: &FeatureMap, centers: &CandidateVolume, gt: &DepthMap) -> Result<Vec<f64>> {
    check_inputs(logits, centers, gt)?;
    let m = gt.valid_count();
    if m == 0 {
        return Err(Error::NoValidPixels);
    }
    let (x, probs) = soft_combine(logits, centers);
    let plane = logits.plane_len();
    let mut grad = vec![0.0; probs.len()];
    for (p, &xp) in x.iter().enumerate() {
        if !gt.valid_mask()[p] {
            continue;
        }
        let diff = xp - gt.values()[p];
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign == 0.0 {
            continue;
        }
        for n in 0..logits.channels() {
            let i = n * plane + p;
            grad[i] = sign / m as f64 * probs[i] * (centers.center(n, p) - xp);
        }
    }
    Ok(grad)
}

/// Compares `analytic` with central differences of `f` at `params`.
///
/// Relative error uses `max(|analytic|, |numeric|, 1e-12)` as denominator.
pub fn finite_diff_check(
    f: impl Fn(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    step: f64,
) -> Result<GradReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParam(format!("step must be positive, got {step}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::InvalidParam(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    let mut theta = params.to_vec();
    let mut report = GradReport { max_rel_error: 0.0, max_abs_error: 0.0, n_params_checked: 0, step };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let plus = f(&theta);
        theta[i] = orig - step;
        let minus = f(&theta);
        theta[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::InvalidParam(format!("non-finite function value at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * step);
        let abs = (numeric - analytic[i]).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(1e-12);
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.n_params_checked += 1;
    }
    Ok(report)
}

/// A random logits/candidates/ground-truth triple.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub logits: FeatureMap,
    pub centers: CandidateVolume,
    pub gt: DepthMap,
}

/// Smallest `|X - Z|` a generated instance allows.
pub const KINK_MARGIN: f64 = 0.05;
/// Smallest `|C_n - X|` a generated instance allows.
pub const CENTER_MARGIN: f64 = 1e-2;

/// Draws an instance whose pixels sit at least [`KINK_MARGIN`] from the L1
/// kink and whose candidates sit at least [`CENTER_MARGIN`] from the
/// combined depth, so every gradient entry is well away from zero.
pub fn random_instance(rng: &mut impl Rng) -> GradInstance {
    loop {
        let n_bins = rng.random_range(2..=8);
        let (h, w) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let plane = h * w;
        let logits: Vec<f64> = (0..n_bins * plane).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut centers = vec![0.0; n_bins * plane];
        for p in 0..plane {
            let mut c: Vec<f64> = (0..n_bins).map(|_| rng.random_range(0.0..10.0)).collect();
            c.sort_by(f64::total_cmp);
            for (n, v) in c.into_iter().enumerate() {
                centers[n * plane + p] = v;
            }
        }
        let logits = FeatureMap::new(n_bins, h, w, logits).expect("finite logits");
        let centers = CandidateVolume::new(n_bins, h, w, centers).expect("sorted centres");
        let (x, _) = soft_combine(&logits, &centers);
        let separated = (0..plane).all(|p| centers.pixel(p).all(|c| (c - x[p]).abs() >= CENTER_MARGIN));
        if !separated {
            continue;
        }
        let gt: Vec<f64> = x
            .iter()
            .map(|&xp| {
                let d = rng.random_range(KINK_MARGIN..2.0);
                if xp - d >= 0.0 && rng.random_bool(0.5) {
                    xp - d
                } else {
                    xp + d
                }
            })
            .collect();
        let gt = DepthMap::from_values(h, w, gt).expect("non-negative ground truth");
        return GradInstance { logits, centers, gt };
    }
}

/// Checks one instance.
pub fn check_instance(inst: &GradInstance, step: f64) -> Result<GradReport> {
    let analytic = grad_combine_l1(&inst.logits, &inst.centers, &inst.gt)?;
    let (c, h, w) = (inst.logits.channels(), inst.logits.height(), inst.logits.width());
    let f = |theta: &[f64]| {
        let logits = FeatureMap::new(c, h, w, theta.to_vec()).expect("finite perturbation");
        combine_l1_loss(&logits, &inst.centers, &inst.gt).expect("shapes fixed")
    };
    finite_diff_check(f, inst.logits.data(), &analytic, step)
}

/// Worst-case report over `trials` seeded random instances.
pub fn random_trials(trials: usize, step: f64, seed: u64) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport { max_rel_error: 0.0, max_abs_error: 0.0, n_params_checked: 0, step };
    for _ in 0..trials {
        report = report.merge(check_instance(&random_instance(&mut rng), step)?);
    }
    Ok(report)
}

/// Largest `|sum_n dL/dlogit_n(p)|` over pixels.
pub fn max_pixel_grad_sum(grad: &[f64], n_bins: usize) -> f64 {
    let plane = grad.len() / n_bins;
    (0..plane)
        .map(|p| (0..n_bins).map(|n| grad[n * plane + p]).sum::<f64>().abs())
        .fold(0.0, f64::max)
}
