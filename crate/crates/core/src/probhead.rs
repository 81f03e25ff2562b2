//! Per-pixel bin probabilities from candidates, context and degradation.
//!
//! The head projects the candidate volume through four 3x3 conv+ReLU
//! layers, concatenates the result with the context features to form the
//! GRU input, initialises a hidden state with a 3x3 conv+tanh, injects the
//! degradation map through a modulated deformable convolution, runs one
//! convolutional GRU step and decodes logits with a 1x1 convolution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conv::{map_features, relu, sigmoid, Conv2d};
use crate::error::{check_shape, Error, Result, Shape};
use crate::types::{CandidateVolume, DegradationMap, FeatureMap, ProbabilityVolume};

/// Side of the deformable kernel.
pub const DEFORM_KERNEL: usize = 3;

/// Learnable parameters of the probability head.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbHeadWeights {
    pub proj: [Conv2d; 4],
    pub hidden_conv: Conv2d,
    /// Degradation -> `2*K*K` offsets, ordered `(dy, dx)` per tap.
    pub offset_conv: Conv2d,
    /// Degradation -> `K*K` modulation logits.
    pub modulation_conv: Conv2d,
    pub deform: Conv2d,
    pub gru_z: Conv2d,
    pub gru_r: Conv2d,
    pub gru_h: Conv2d,
    pub head: Conv2d,
}

impl ProbHeadWeights {
    /// Seeded uniform initialisation.
    ///
    /// `context_channels` counts everything concatenated after the projected
    /// candidates (context plus layer features).
    pub fn seeded(n_bins: usize, hidden: usize, context_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = hidden + context_channels;
        let kk = DEFORM_KERNEL * DEFORM_KERNEL;
        Self {
            proj: [
                Conv2d::seeded(n_bins, hidden, 3, &mut rng),
                Conv2d::seeded(hidden, hidden, 3, &mut rng),
                Conv2d::seeded(hidden, hidden, 3, &mut rng),
                Conv2d::seeded(hidden, hidden, 3, &mut rng),
            ],
            hidden_conv: Conv2d::seeded(q, hidden, 3, &mut rng),
            offset_conv: Conv2d::seeded(1, 2 * kk, 3, &mut rng),
            modulation_conv: Conv2d::seeded(1, kk, 3, &mut rng),
            deform: Conv2d::seeded(hidden, hidden, DEFORM_KERNEL, &mut rng),
            gru_z: Conv2d::seeded(q + hidden, hidden, 3, &mut rng),
            gru_r: Conv2d::seeded(q + hidden, hidden, 3, &mut rng),
            gru_h: Conv2d::seeded(q + hidden, hidden, 3, &mut rng),
            head: Conv2d::seeded(hidden, n_bins, 1, &mut rng),
        }
    }

    /// All-zero weights: uniform probabilities whatever the input.
    pub fn zeros(n_bins: usize, hidden: usize, context_channels: usize) -> Self {
        let q = hidden + context_channels;
        let kk = DEFORM_KERNEL * DEFORM_KERNEL;
        Self {
            proj: [
                Conv2d::zeros(n_bins, hidden, 3),
                Conv2d::zeros(hidden, hidden, 3),
                Conv2d::zeros(hidden, hidden, 3),
                Conv2d::zeros(hidden, hidden, 3),
            ],
            hidden_conv: Conv2d::zeros(q, hidden, 3),
            offset_conv: Conv2d::zeros(1, 2 * kk, 3),
            modulation_conv: Conv2d::zeros(1, kk, 3),
            deform: Conv2d::zeros(hidden, hidden, DEFORM_KERNEL),
            gru_z: Conv2d::zeros(q + hidden, hidden, 3),
            gru_r: Conv2d::zeros(q + hidden, hidden, 3),
            gru_h: Conv2d::zeros(q + hidden, hidden, 3),
            head: Conv2d::zeros(hidden, n_bins, 1),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.head.out_channels()
    }

    pub fn hidden_channels(&self) -> usize {
        self.head.in_channels()
    }

    pub fn context_channels(&self) -> usize {
        self.hidden_conv.in_channels() - self.hidden_channels()
    }

    /// Named convolutions in serialisation order.
    pub fn named_convs(&self) -> Vec<(&'static str, &Conv2d)> {
        vec![
            ("proj0", &self.proj[0]),
            ("proj1", &self.proj[1]),
            ("proj2", &self.proj[2]),
            ("proj3", &self.proj[3]),
            ("hidden", &self.hidden_conv),
            ("offset", &self.offset_conv),
            ("modulation", &self.modulation_conv),
            ("deform", &self.deform),
            ("gru_z", &self.gru_z),
            ("gru_r", &self.gru_r),
            ("gru_h", &self.gru_h),
            ("head", &self.head),
        ]
    }

    /// Rebuilds weights from convolutions given in [`Self::named_convs`] order.
    pub fn from_convs(convs: Vec<Conv2d>) -> Result<Self> {
        let convs: [Conv2d; 12] = convs
            .try_into()
            .map_err(|v: Vec<Conv2d>| Error::InvalidParam(format!("expected 12 convolutions, got {}", v.len())))?;
        let [p0, p1, p2, p3, hidden_conv, offset_conv, modulation_conv, deform, gru_z, gru_r, gru_h, head] = convs;
        let w = Self {
            proj: [p0, p1, p2, p3],
            hidden_conv,
            offset_conv,
            modulation_conv,
            deform,
            gru_z,
            gru_r,
            gru_h,
            head,
        };
        w.check_consistency()?;
        Ok(w)
    }

    /// Checks that channel counts chain together.
    pub fn check_consistency(&self) -> Result<()> {
        let hid = self.hidden_channels();
        let n = self.n_bins();
        let kk = DEFORM_KERNEL * DEFORM_KERNEL;
        let q = self.hidden_conv.in_channels();
        let bad = |what: &str| Err(Error::InvalidParam(format!("inconsistent probability head: {what}")));
        if self.proj[0].in_channels() != n || self.proj[0].out_channels() != hid {
            return bad("proj0");
        }
        for (i, c) in self.proj.iter().enumerate().skip(1) {
            if c.in_channels() != hid || c.out_channels() != hid {
                return bad(&format!("proj{i}"));
            }
        }
        if self.proj.iter().any(|c| c.kernel() != 3) {
            return bad("projection kernels must be 3x3");
        }
        if q < hid || self.hidden_conv.out_channels() != hid {
            return bad("hidden");
        }
        if self.offset_conv.in_channels() != 1 || self.offset_conv.out_channels() != 2 * kk {
            return bad("offset");
        }
        if self.modulation_conv.in_channels() != 1 || self.modulation_conv.out_channels() != kk {
            return bad("modulation");
        }
        if self.deform.in_channels() != hid
            || self.deform.out_channels() != hid
            || self.deform.kernel() != DEFORM_KERNEL
        {
            return bad("deform");
        }
        for (name, c) in [("gru_z", &self.gru_z), ("gru_r", &self.gru_r), ("gru_h", &self.gru_h)] {
            if c.in_channels() != q + hid || c.out_channels() != hid {
                return bad(name);
            }
        }
        if self.head.kernel() != 1 {
            return bad("head must be 1x1");
        }
        Ok(())
    }

    /// Full head: candidates plus stage features and degradation to
    /// probabilities.
    pub fn estimate(
        &self,
        centers: &CandidateVolume,
        stage_features: &FeatureMap,
        deg: &DegradationMap,
    ) -> Result<ProbabilityVolume> {
        let projected = project_candidates(centers, self)?;
        let q = build_gru_input(&projected, stage_features)?;
        let h0 = init_hidden(&q, self)?;
        let h = deform_modulate(&h0, deg, self)?;
        let h1 = conv_gru_step(&q, &h, self)?;
        probability_head(&h1, self)
    }
}

/// Four 3x3 conv + ReLU layers over the `N`-channel candidate grid.
pub fn project_candidates(centers: &CandidateVolume, w: &ProbHeadWeights) -> Result<FeatureMap> {
    let mut feat = centers.as_features();
    for conv in &w.proj {
        feat = map_features(conv.forward(&feat)?, relu);
    }
    Ok(feat)
}

/// Channel concatenation `[projected; context]`.
pub fn build_gru_input(projected: &FeatureMap, context: &FeatureMap) -> Result<FeatureMap> {
    FeatureMap::concat(&[projected, context])
}

/// `tanh(conv(feat))`.
pub fn init_hidden(feat: &FeatureMap, w: &ProbHeadWeights) -> Result<FeatureMap> {
    Ok(map_features(w.hidden_conv.forward(feat)?, f64::tanh))
}

/// Bilinear sample of one channel plane at fractional `(py, px)`; taps
/// outside the image read zero.
#[inline]
pub fn bilinear_zero(plane: &[f64], h: usize, w: usize, py: f64, px: f64) -> f64 {
    let y0 = py.floor();
    let x0 = px.floor();
    let fy = py - y0;
    let fx = px - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            plane[y as usize * w + x as usize]
        }
    };
    let mut v = 0.0;
    if fy < 1.0 && fx < 1.0 {
        v += (1.0 - fy) * (1.0 - fx) * at(y0, x0);
    }
    if fx > 0.0 {
        v += (1.0 - fy) * fx * at(y0, x0 + 1);
    }
    if fy > 0.0 {
        v += fy * (1.0 - fx) * at(y0 + 1, x0);
    }
    if fy > 0.0 && fx > 0.0 {
        v += fy * fx * at(y0 + 1, x0 + 1);
    }
    v
}

/// `H + J(H, D)`: a modulated deformable convolution of the hidden state
/// whose offsets and modulation scalars are convolved from the degradation
/// map, added back onto the hidden state.
pub fn deform_modulate(hidden: &FeatureMap, deg: &DegradationMap, w: &ProbHeadWeights) -> Result<FeatureMap> {
    check_shape(hidden.spatial_shape(), deg.shape())?;
    let conv = &w.deform;
    if hidden.channels() != conv.in_channels() {
        return Err(Error::ShapeMismatch {
            expected: Shape::chw(conv.in_channels(), hidden.height(), hidden.width()),
            found: hidden.shape(),
        });
    }
    let d = FeatureMap::from_degradation(deg);
    let offsets = w.offset_conv.forward(&d)?;
    let modulation = map_features(w.modulation_conv.forward(&d)?, sigmoid);

    let (h, wd) = (hidden.height(), hidden.width());
    let plane = h * wd;
    let k = conv.kernel();
    let r = (k / 2) as f64;
    let cin = hidden.channels();

    // Modulated samples per (tap, in-channel), shared by every output channel.
    let mut samples = vec![0.0; k * k * cin * plane];
    for t in 0..k * k {
        let (ky, kx) = (t / k, t % k);
        let dy_plane = offsets.channel(2 * t);
        let dx_plane = offsets.channel(2 * t + 1);
        let m_plane = modulation.channel(t);
        for i in 0..cin {
            let src = hidden.channel(i);
            let dst = &mut samples[(t * cin + i) * plane..(t * cin + i + 1) * plane];
            for y in 0..h {
                for x in 0..wd {
                    let p = y * wd + x;
                    let py = y as f64 + ky as f64 - r + dy_plane[p];
                    let px = x as f64 + kx as f64 - r + dx_plane[p];
                    dst[p] = m_plane[p] * bilinear_zero(src, h, wd, py, px);
                }
            }
        }
    }

    let cout = conv.out_channels();
    let mut out = hidden.data()[..cout * plane].to_vec();
    for o in 0..cout {
        let dst = &mut out[o * plane..(o + 1) * plane];
        let mut j = vec![conv.bias(o); plane];
        for t in 0..k * k {
            let (ky, kx) = (t / k, t % k);
            for i in 0..cin {
                let wv = conv.weight(o, i, ky, kx);
                if wv == 0.0 {
                    continue;
                }
                let s = &samples[(t * cin + i) * plane..(t * cin + i + 1) * plane];
                for (acc, &v) in j.iter_mut().zip(s) {
                    *acc += wv * v;
                }
            }
        }
        for (hv, jv) in dst.iter_mut().zip(j) {
            *hv += jv;
        }
    }
    Ok(FeatureMap::from_raw(cout, h, wd, out))
}

/// One convolutional GRU update of `hidden` driven by `q`.
pub fn conv_gru_step(q: &FeatureMap, hidden: &FeatureMap, w: &ProbHeadWeights) -> Result<FeatureMap> {
    check_shape(q.spatial_shape(), hidden.spatial_shape())?;
    let hq = FeatureMap::concat(&[q, hidden])?;
    let z = map_features(w.gru_z.forward(&hq)?, sigmoid);
    let r = map_features(w.gru_r.forward(&hq)?, sigmoid);
    let rh: Vec<f64> = r.data().iter().zip(hidden.data()).map(|(a, b)| a * b).collect();
    let rh = FeatureMap::from_raw(hidden.channels(), hidden.height(), hidden.width(), rh);
    let cand = map_features(w.gru_h.forward(&FeatureMap::concat(&[q, &rh])?)?, f64::tanh);
    let out = z
        .data()
        .iter()
        .zip(hidden.data())
        .zip(cand.data())
        .map(|((&z, &h), &c)| (1.0 - z) * h + z * c)
        .collect();
    Ok(FeatureMap::from_raw(hidden.channels(), hidden.height(), hidden.width(), out))
}

/// Softmax over the channel axis at every pixel.
pub fn softmax_channels(logits: &FeatureMap) -> Vec<f64> {
    let (n, plane) = (logits.channels(), logits.plane_len());
    let data = logits.data();
    let mut out = vec![0.0; data.len()];
    for p in 0..plane {
        let max = (0..n).map(|c| data[c * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..n {
            let e = (data[c * plane + p] - max).exp();
            out[c * plane + p] = e;
            sum += e;
        }
        for c in 0..n {
            out[c * plane + p] /= sum;
        }
    }
    out
}

/// ReLU applied after a channel softmax.
pub fn relu_softmax(logits: &FeatureMap) -> Result<ProbabilityVolume> {
    let probs = softmax_channels(logits).into_iter().map(relu).collect();
    ProbabilityVolume::new(logits.channels(), logits.height(), logits.width(), probs)
}

/// `ReLU(softmax(head(hidden)))` over the bin axis.
pub fn probability_head(hidden: &FeatureMap, w: &ProbHeadWeights) -> Result<ProbabilityVolume> {
    relu_softmax(&w.head.forward(hidden)?)
}
