//! Dense "same"-size 2-D convolution, plus the pointwise
//! activations used by the probability head and the feature encoder.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result, Shape};
use crate::types::FeatureMap;

/// Upper bound on im2col buffer entries per band.
const COL_BUDGET: usize = 1 << 19;

/// A square, odd-sized convolution kernel bank with per-output bias.
///
/// Weights are laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kernel == 0 || kernel.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!("kernel size must be odd, got {kernel}")));
        }
        let expected = out_channels * in_channels * kernel * kernel;
        if weight.len() != expected || bias.len() != out_channels {
            return Err(Error::InvalidParam(format!(
                "conv {in_channels}->{out_channels} k{kernel} expects {expected} weights and \
                 {out_channels} biases, got {} and {}",
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("convolution weights must be finite".into()));
        }
        Ok(Self { in_channels, out_channels, kernel, weight, bias })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(
            in_channels,
            out_channels,
            kernel,
            vec![0.0; out_channels * in_channels * kernel * kernel],
            vec![0.0; out_channels],
        )
        .expect("zero kernel with odd size")
    }

    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for both
    /// weights and biases.
    pub fn seeded<R: Rng>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = (in_channels * kernel * kernel).max(1) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let weight = (0..out_channels * in_channels * kernel * kernel)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let bias = (0..out_channels).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::new(in_channels, out_channels, kernel, weight, bias).expect("seeded kernel is valid")
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn biases(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        let k = self.kernel;
        self.weight[((o * self.in_channels + i) * k + ky) * k + kx]
    }

    pub fn bias(&self, o: usize) -> f64 {
        self.bias[o]
    }

    /// Tensor shape `[out, in, k, k]`.
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    /// Convolution with "same" zero padding.
    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        self.forward_padded(input, Padding::Zeros)
    }

    pub fn forward_padded(&self, input: &FeatureMap, padding: Padding) -> Result<FeatureMap> {
        if input.channels() != self.in_channels {
            return Err(Error::ShapeMismatch {
                expected: Shape::chw(self.in_channels, input.height(), input.width()),
                found: input.shape(),
            });
        }
        let (h, w) = (input.height(), input.width());
        let plane = h * w;
        let k = self.kernel;
        let padded = pad(input, k / 2, padding);
        let pw = w + k - 1;
        let pplane = (h + k - 1) * pw;
        let depth = self.in_channels * k * k;
        let cout = self.out_channels;
        if plane == 0 || cout == 0 {
            return Ok(FeatureMap::from_raw(cout, h, w, vec![0.0; cout * plane]));
        }

        // im2col over bands of output rows, one GEMM per band.
        let band = (COL_BUDGET / (depth * w).max(1)).clamp(1, h);
        let bands: Vec<(usize, Vec<f64>)> = (0..h)
            .step_by(band)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|y0| {
                let rows = band.min(h - y0);
                let n = rows * w;
                let mut col = vec![0.0; depth * n];
                for i in 0..self.in_channels {
                    let src = &padded[i * pplane..(i + 1) * pplane];
                    for ky in 0..k {
                        for kx in 0..k {
                            let r = (i * k + ky) * k + kx;
                            for y in 0..rows {
                                let s = (y0 + y + ky) * pw + kx;
                                col[r * n + y * w..r * n + (y + 1) * w].copy_from_slice(&src[s..s + w]);
                            }
                        }
                    }
                }
                let mut acc: Vec<f64> = self.bias.iter().flat_map(|&b| std::iter::repeat_n(b, n)).collect();
                // SAFETY: row-major `cout x depth`, `depth x n` and `cout x n`
                // buffers, each sized exactly by the strides passed.
                unsafe {
                    matrixmultiply::dgemm(
                        cout,
                        depth,
                        n,
                        1.0,
                        self.weight.as_ptr(),
                        depth as isize,
                        1,
                        col.as_ptr(),
                        n as isize,
                        1,
                        1.0,
                        acc.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
                (y0, acc)
            })
            .collect();
        let mut out = vec![0.0; cout * plane];
        for (y0, acc) in bands {
            let n = acc.len() / cout;
            for o in 0..cout {
                out[o * plane + y0 * w..o * plane + y0 * w + n].copy_from_slice(&acc[o * n..(o + 1) * n]);
            }
        }
        Ok(FeatureMap::from_raw(self.out_channels, h, w, out))
    }
}

/// Border handling for "same"-size convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zeros,
    /// Repeat the nearest edge pixel.
    Replicate,
}

fn pad(input: &FeatureMap, r: usize, padding: Padding) -> Vec<f64> {
    let (h, w) = (input.height(), input.width());
    let (ph, pw) = (h + 2 * r, w + 2 * r);
    let mut out = vec![0.0; input.channels() * ph * pw];
    for c in 0..input.channels() {
        let src = input.channel(c);
        let dst = &mut out[c * ph * pw..(c + 1) * ph * pw];
        for py in 0..ph {
            let sy = py as isize - r as isize;
            for px in 0..pw {
                let sx = px as isize - r as isize;
                let inside = sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w;
                dst[py * pw + px] = match (inside, padding) {
                    (true, _) => src[sy as usize * w + sx as usize],
                    (false, Padding::Zeros) => 0.0,
                    (false, Padding::Replicate) => {
                        let y = sy.clamp(0, h as isize - 1) as usize;
                        let x = sx.clamp(0, w as isize - 1) as usize;
                        src[y * w + x]
                    }
                };
            }
        }
    }
    out
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub(crate) fn map_features(f: FeatureMap, op: impl Fn(f64) -> f64 + Sync) -> FeatureMap {
    let (c, h, w) = (f.channels(), f.height(), f.width());
    let mut data = f.into_data();
    data.par_iter_mut().for_each(|v| *v = op(*v));
    FeatureMap::from_raw(c, h, w, data)
}
