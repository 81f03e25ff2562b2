//! Synthetic low-resolution inputs: bicubic resampling, Gaussian blur and
//! additive Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::DepthMap;

/// Cubic convolution parameter (Catmull-Rom).
pub const CUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeSpec {
    /// Downsampling factor; non-integer values are allowed.
    pub scale: f64,
    pub blur_sigma: f64,
    pub noise_mean: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DegradeSpec {
    fn default() -> Self {
        Self { scale: 4.0, blur_sigma: 0.0, noise_mean: 0.0, noise_sigma: 0.0, seed: 0 }
    }
}

impl DegradeSpec {
    /// Blur 3.6 and zero-mean noise with standard deviation 0.07, as used for
    /// the noisy real-world setting.
    pub fn noisy(scale: f64, seed: u64) -> Self {
        Self { scale, blur_sigma: 3.6, noise_mean: 0.0, noise_sigma: 0.07, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParam(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::InvalidParam("blur sigma must be non-negative".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) || !self.noise_mean.is_finite() {
            return Err(Error::InvalidParam("noise parameters must be finite, sigma non-negative".into()));
        }
        Ok(())
    }
}

/// Cubic convolution kernel with parameter [`CUBIC_A`].
pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Weights of taps `i0-1, i0, i0+1, i0+2` for a sample at `i0 + t`, `t` in `[0, 1)`.
pub fn cubic_weights(t: f64) -> [f64; 4] {
    [cubic_kernel(1.0 + t), cubic_kernel(t), cubic_kernel(1.0 - t), cubic_kernel(2.0 - t)]
}

struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn axis_taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let ratio = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|d| {
            let src = (d as f64 + 0.5) * ratio - 0.5;
            let i0 = src.floor();
            let t = src - i0;
            let i0 = i0 as isize;
            let clamp = |i: isize| i.clamp(0, n_in as isize - 1) as usize;
            Taps {
                index: [clamp(i0 - 1), clamp(i0), clamp(i0 + 1), clamp(i0 + 2)],
                weight: cubic_weights(t),
            }
        })
        .collect()
}

fn nearest_index(d: usize, n_in: usize, n_out: usize) -> usize {
    let src = ((d as f64 + 0.5) * n_in as f64 / n_out as f64).floor() as usize;
    src.min(n_in - 1)
}

/// Separable bicubic resampling with edge clamping and half-pixel-centre
/// coordinate mapping. Output values are clamped at zero; the mask follows
/// the nearest source pixel. Same-size axes are copied unchanged.
pub fn bicubic_resample(depth: &DepthMap, out_h: usize, out_w: usize) -> Result<DepthMap> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidParam(format!("output size {out_h}x{out_w} is empty")));
    }
    let (h, w) = (depth.height(), depth.width());
    if (h, w) == (out_h, out_w) {
        return Ok(depth.clone());
    }
    let src = depth.values();

    let horizontal: Vec<f64> = if w == out_w {
        src.to_vec()
    } else {
        let taps = axis_taps(w, out_w);
        let mut buf = Vec::with_capacity(h * out_w);
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for t in &taps {
                buf.push((0..4).map(|j| t.weight[j] * row[t.index[j]]).sum::<f64>());
            }
        }
        buf
    };

    let values: Vec<f64> = if h == out_h {
        horizontal
    } else {
        let taps = axis_taps(h, out_h);
        let mut buf = Vec::with_capacity(out_h * out_w);
        for t in &taps {
            for x in 0..out_w {
                buf.push((0..4).map(|j| t.weight[j] * horizontal[t.index[j] * out_w + x]).sum::<f64>());
            }
        }
        buf
    };
    let values = values.into_iter().map(|v| v.max(0.0)).collect();

    let mask = depth.valid_mask();
    let mut valid = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let sy = nearest_index(y, h, out_h);
        for x in 0..out_w {
            valid.push(mask[sy * w + nearest_index(x, w, out_w)]);
        }
    }
    DepthMap::new(out_h, out_w, values, valid)
}

/// Discrete Gaussian of radius `ceil(3 sigma)`, normalised to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian blur with edge clamping; `sigma = 0` is the identity.
pub fn gaussian_blur(depth: &DepthMap, sigma: f64) -> Result<DepthMap> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParam(format!("blur sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(depth.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (h, w) = (depth.height(), depth.width());
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let src = depth.values();
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * src[y * w + clamp(x as isize + j as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * tmp[clamp(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    }
    depth.with_values(out)
}

/// `n` seeded normal samples, in the order they are added to pixels.
pub fn gaussian_noise_samples(n: usize, mean: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(mean, sigma)
        .map_err(|e| Error::InvalidParam(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Adds i.i.d. normal noise (row-major, one draw per pixel) and clamps at 0.
pub fn add_gaussian_noise(depth: &DepthMap, mean: f64, sigma: f64, seed: u64) -> Result<DepthMap> {
    if !(sigma >= 0.0 && sigma.is_finite()) || !mean.is_finite() {
        return Err(Error::InvalidParam("noise sigma must be non-negative and mean finite".into()));
    }
    let values = if sigma == 0.0 {
        depth.values().iter().map(|v| (v + mean).max(0.0)).collect()
    } else {
        let noise = gaussian_noise_samples(depth.len(), mean, sigma, seed)?;
        depth.values().iter().zip(noise).map(|(v, n)| (v + n).max(0.0)).collect()
    };
    depth.with_values(values)
}

/// Output size for a downsampling factor.
pub fn lr_size(height: usize, width: usize, scale: f64) -> Result<(usize, usize)> {
    let h = (height as f64 / scale).round();
    let w = (width as f64 / scale).round();
    if !(h >= 1.0 && w >= 1.0) {
        return Err(Error::InvalidParam(format!(
            "scale {scale} on {height}x{width} gives an empty output"
        )));
    }
    Ok((h as usize, w as usize))
}

/// Bicubic downsampling, then blur and noise at LR resolution. Steps with
/// zero parameters are skipped.
pub fn make_lr(gt: &DepthMap, spec: &DegradeSpec) -> Result<DepthMap> {
    spec.validate()?;
    let (h, w) = lr_size(gt.height(), gt.width(), spec.scale)?;
    let mut lr = bicubic_resample(gt, h, w)?;
    if spec.blur_sigma > 0.0 {
        lr = gaussian_blur(&lr, spec.blur_sigma)?;
    }
    if spec.noise_sigma > 0.0 || spec.noise_mean != 0.0 {
        lr = add_gaussian_noise(&lr, spec.noise_mean, spec.noise_sigma, spec.seed)?;
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> DepthMap {
        DepthMap::from_fn(h, w, |y, x| 10.0 + y as f64 * 1.5 + (x as f64 * 0.7).sin() * 3.0).unwrap()
    }

    #[test]
    fn half_pixel_weights() {
        assert_eq!(cubic_weights(0.5), [-0.0625, 0.5625, 0.5625, -0.0625]);
        assert_eq!(cubic_weights(0.0), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn weights_partition_unity() {
        for i in 0..100 {
            let t = i as f64 / 100.0;
            let s: f64 = cubic_weights(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn same_size_is_identity() {
        let d = ramp(7, 9);
        assert_eq!(bicubic_resample(&d, 7, 9).unwrap(), d);
    }

    #[test]
    fn constant_stays_constant() {
        let d = DepthMap::filled(9, 13, 42.0).unwrap();
        for &(h, w) in &[(3, 4), (20, 31), (9, 5)] {
            let r = bicubic_resample(&d, h, w).unwrap();
            assert!(r.values().iter().all(|v| (v - 42.0).abs() < 1e-12));
        }
        let b = gaussian_blur(&d, 2.3).unwrap();
        assert!(b.values().iter().all(|v| (v - 42.0).abs() < 1e-12));
    }

    #[test]
    fn downsample_by_two_uses_half_pixel_taps() {
        // 1-D signal of length 8 down to 4: every sample lands at i + 0.5.
        let sig = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 3.0, 6.0];
        let d = DepthMap::from_values(1, 8, sig.to_vec()).unwrap();
        let r = bicubic_resample(&d, 1, 4).unwrap();
        let w = cubic_weights(0.5);
        let at = |i: isize| sig[i.clamp(0, 7) as usize];
        for k in 0..4 {
            let i0 = 2 * k as isize;
            let expect: f64 = (0..4).map(|j| w[j] * at(i0 - 1 + j as isize)).sum::<f64>().max(0.0);
            assert!((r.get(0, k) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_impulse() {
        let mut v = vec![0.0; 21 * 21];
        v[10 * 21 + 10] = 1.0;
        let d = DepthMap::from_values(21, 21, v).unwrap();
        let b = gaussian_blur(&d, 1.0).unwrap();
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((b.get(10, 10) - k[3] * k[3]).abs() < 1e-15);
        let total: f64 = b.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for y in 7..=13 {
            let row: f64 = (0..21).map(|x| b.get(y, x)).sum();
            assert!((row - k[y - 7]).abs() < 1e-15);
        }
        assert_eq!(gaussian_blur(&d, 0.0).unwrap(), d);
    }

    #[test]
    fn noise_is_seeded() {
        let d = DepthMap::filled(16, 16, 50.0).unwrap();
        let a = add_gaussian_noise(&d, 0.0, 0.5, 3).unwrap();
        let b = add_gaussian_noise(&d, 0.0, 0.5, 3).unwrap();
        let c = add_gaussian_noise(&d, 0.0, 0.5, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let shifted = add_gaussian_noise(&d, 1.5, 0.0, 0).unwrap();
        assert!(shifted.values().iter().all(|&v| v == 51.5));
    }

    #[test]
    fn noise_clamps_at_zero() {
        let d = DepthMap::filled(8, 8, 0.01).unwrap();
        let n = add_gaussian_noise(&d, 0.0, 5.0, 1).unwrap();
        assert!(n.values().iter().all(|&v| v >= 0.0));
        assert!(n.values().contains(&0.0));
    }

    #[test]
    fn lr_sizes() {
        let gt = DepthMap::filled(256, 256, 1.0).unwrap();
        let spec = DegradeSpec { scale: 4.0, ..Default::default() };
        let lr = make_lr(&gt, &spec).unwrap();
        assert_eq!((lr.height(), lr.width()), (64, 64));
        assert_eq!(lr_size(330, 330, 3.3).unwrap(), (100, 100));
        assert!(lr_size(2, 2, 10.0).is_err());
        let one = DegradeSpec { scale: 1.0, ..Default::default() };
        let d = ramp(5, 6);
        assert_eq!(make_lr(&d, &one).unwrap(), d);
        assert!(make_lr(&d, &DegradeSpec { scale: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn mask_follows_nearest_source() {
        let mut valid = vec![true; 16];
        valid[5] = false;
        let d = DepthMap::new(4, 4, vec![3.0; 16], valid).unwrap();
        let r = bicubic_resample(&d, 2, 2).unwrap();
        // nearest of output (0,0) is source (1,1) = index 5
        assert!(!r.is_valid(0, 0));
        assert!(r.is_valid(1, 1));
    }
}
