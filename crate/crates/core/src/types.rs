//! Shared value types.
//!
//! Every grid is stored row-major as a flat `Vec<f64>`. Volumes with a
//! leading channel or bin axis use `C×H×W` order, so channel `c` of a
//! volume occupies `data[c*H*W .. (c+1)*H*W]`. A pixel index `p` is always
//! `y * width + x`.
//!
//! Constructors validate their invariants; once built, values are immutable.

use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result, Shape};

/// Largest accepted deviation of a per-pixel probability sum from 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Invariant check shared by every grid type.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

#[inline]
pub(crate) fn pixel_yx(p: usize, width: usize) -> (usize, usize) {
    (p / width, p % width)
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParam(format!(
            "grid dimensions must be at least 1x1, got {height}x{width}"
        )));
    }
    Ok(())
}

fn check_len(shape: Shape, len: usize) -> Result<()> {
    let expected = shape.channels.unwrap_or(1) * shape.height * shape.width;
    if len != expected {
        let found_channels = len.checked_div(shape.height * shape.width).unwrap_or(0);
        let found = match shape.channels {
            Some(_) => Shape::chw(found_channels, shape.height, shape.width),
            None => Shape::hw(len / shape.width.max(1), shape.width),
        };
        return Err(Error::ShapeMismatch { expected: shape, found });
    }
    Ok(())
}

/// A depth grid in centimetres with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let map = Self { height, width, values, valid };
        map.validate()?;
        Ok(map)
    }

    /// A map whose pixels are all valid.
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(height, width, values, valid)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::from_values(height, width, vec![value; height * width])
    }

    /// Builds a map from a per-pixel closure; all pixels valid.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Self::from_values(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> Shape {
        Shape::hw(self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, y: usize, x: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Minimum and maximum over valid pixels, or `None` if no pixel is valid.
    pub fn valid_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Replaces the values, keeping the mask.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.height, self.width, values, self.valid.clone())
    }

    pub fn into_parts(self) -> (usize, usize, Vec<f64>, Vec<bool>) {
        (self.height, self.width, self.values, self.valid)
    }
}

impl Validate for DepthMap {
    fn validate(&self) -> Result<()> {
        check_dims(self.height, self.width)?;
        let shape = self.shape();
        check_len(shape, self.values.len())?;
        check_len(shape, self.valid.len())?;
        for (p, (&v, &ok)) in self.values.iter().zip(&self.valid).enumerate() {
            if !ok {
                continue;
            }
            let (y, x) = pixel_yx(p, self.width);
            if !v.is_finite() {
                return Err(Error::NonFinite { field: "depth", y, x });
            }
            if v < 0.0 {
                return Err(Error::Negative { field: "depth", y, x, value: v });
            }
        }
        Ok(())
    }
}

/// A `C×H×W` real feature tensor. Zero channels are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let map = Self { channels, height, width, data };
        map.validate()?;
        Ok(map)
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    /// Single-channel view of a depth map (invalid pixels read as stored).
    pub fn from_depth(depth: &DepthMap) -> Self {
        Self {
            channels: 1,
            height: depth.height(),
            width: depth.width(),
            data: depth.values().to_vec(),
        }
    }

    pub fn from_degradation(deg: &DegradationMap) -> Self {
        Self { channels: 1, height: deg.height(), width: deg.width(), data: deg.values().to_vec() }
    }

    pub(crate) fn from_raw(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self { channels, height, width, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> Shape {
        Shape::chw(self.channels, self.height, self.width)
    }

    pub fn spatial_shape(&self) -> Shape {
        Shape::hw(self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Channel-wise concatenation; all inputs must share `H×W`.
    pub fn concat(parts: &[&FeatureMap]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParam("nothing to concatenate".into()))?;
        let spatial = first.spatial_shape();
        let mut data = Vec::with_capacity(parts.iter().map(|f| f.data.len()).sum());
        let mut channels = 0;
        for part in parts {
            check_shape(spatial, part.spatial_shape())?;
            data.extend_from_slice(&part.data);
            channels += part.channels;
        }
        Ok(Self::from_raw(channels, spatial.height, spatial.width, data))
    }
}

impl Validate for FeatureMap {
    fn validate(&self) -> Result<()> {
        check_dims(self.height, self.width)?;
        check_len(self.shape(), self.data.len())?;
        let n = self.plane_len();
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            let (y, x) = pixel_yx(i % n, self.width);
            return Err(Error::NonFinite { field: "feature", y, x });
        }
        Ok(())
    }
}

/// Non-negative per-pixel degradation magnitudes (unitless).
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DegradationMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let map = Self { height, width, values };
        map.validate()?;
        Ok(map)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        Shape::hw(self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

impl Validate for DegradationMap {
    fn validate(&self) -> Result<()> {
        check_dims(self.height, self.width)?;
        check_len(self.shape(), self.values.len())?;
        for (p, &v) in self.values.iter().enumerate() {
            let (y, x) = pixel_yx(p, self.width);
            if !v.is_finite() {
                return Err(Error::NonFinite { field: "degradation", y, x });
            }
            if v < 0.0 {
                return Err(Error::Negative { field: "degradation", y, x, value: v });
            }
        }
        Ok(())
    }
}

/// Per-pixel depth interval `[v_min, v_max]` split into `n_bins` uniform bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    n_bins: usize,
    height: usize,
    width: usize,
    v_min: Vec<f64>,
    v_max: Vec<f64>,
}

impl BinPartition {
    pub fn new(
        n_bins: usize,
        height: usize,
        width: usize,
        v_min: Vec<f64>,
        v_max: Vec<f64>,
    ) -> Result<Self> {
        let part = Self { n_bins, height, width, v_min, v_max };
        part.validate()?;
        Ok(part)
    }

    /// The same range at every pixel.
    pub fn broadcast(n_bins: usize, height: usize, width: usize, lo: f64, hi: f64) -> Result<Self> {
        let n = height * width;
        Self::new(n_bins, height, width, vec![lo; n], vec![hi; n])
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        Shape::hw(self.height, self.width)
    }

    pub fn v_min(&self) -> &[f64] {
        &self.v_min
    }

    pub fn v_max(&self) -> &[f64] {
        &self.v_max
    }

    /// Bin width `W(p)`.
    #[inline]
    pub fn bin_width(&self, p: usize) -> f64 {
        (self.v_max[p] - self.v_min[p]) / self.n_bins as f64
    }

    /// Edge `u_n(p)` for `n` in `0..=N`. The last edge is `v_max` exactly.
    #[inline]
    pub fn edge(&self, n: usize, p: usize) -> f64 {
        debug_assert!(n <= self.n_bins);
        if n == self.n_bins {
            self.v_max[p]
        } else {
            self.v_min[p] + n as f64 * self.bin_width(p)
        }
    }

    /// All `N + 1` edges at pixel `p`.
    pub fn edges(&self, p: usize) -> Vec<f64> {
        (0..=self.n_bins).map(|n| self.edge(n, p)).collect()
    }

    /// Range width `v_max - v_min` at pixel `p`.
    #[inline]
    pub fn range_width(&self, p: usize) -> f64 {
        self.v_max[p] - self.v_min[p]
    }
}

impl Validate for BinPartition {
    fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::InvalidParam("n_bins must be at least 1".into()));
        }
        check_dims(self.height, self.width)?;
        check_len(self.shape(), self.v_min.len())?;
        check_len(self.shape(), self.v_max.len())?;
        for p in 0..self.v_min.len() {
            let (y, x) = pixel_yx(p, self.width);
            let (lo, hi) = (self.v_min[p], self.v_max[p]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite { field: "bin range", y, x });
            }
            if lo > hi {
                return Err(Error::InvertedRange { y, x, v_min: lo, v_max: hi });
            }
            if !self.bin_width(p).is_finite() {
                return Err(Error::NonFinite { field: "bin width", y, x });
            }
        }
        Ok(())
    }
}

/// Bin centres (depth candidates), `N×H×W`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateVolume {
    n_bins: usize,
    height: usize,
    width: usize,
    centers: Vec<f64>,
}

impl CandidateVolume {
    pub fn new(n_bins: usize, height: usize, width: usize, centers: Vec<f64>) -> Result<Self> {
        let vol = Self { n_bins, height, width, centers };
        vol.validate()?;
        Ok(vol)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        Shape::chw(self.n_bins, self.height, self.width)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    #[inline]
    pub fn center(&self, n: usize, p: usize) -> f64 {
        self.centers[n * self.height * self.width + p]
    }

    /// The `N` candidates at pixel `p`.
    pub fn pixel(&self, p: usize) -> impl Iterator<Item = f64> + '_ {
        let stride = self.height * self.width;
        (0..self.n_bins).map(move |n| self.centers[n * stride + p])
    }

    pub fn as_features(&self) -> FeatureMap {
        FeatureMap::from_raw(self.n_bins, self.height, self.width, self.centers.clone())
    }
}

impl Validate for CandidateVolume {
    fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::InvalidParam("n_bins must be at least 1".into()));
        }
        check_dims(self.height, self.width)?;
        check_len(self.shape(), self.centers.len())?;
        let stride = self.height * self.width;
        for p in 0..stride {
            let (y, x) = pixel_yx(p, self.width);
            let mut prev = f64::NEG_INFINITY;
            for n in 0..self.n_bins {
                let c = self.centers[n * stride + p];
                if !c.is_finite() {
                    return Err(Error::NonFinite { field: "candidate", y, x });
                }
                if c < prev {
                    return Err(Error::UnorderedCenters { bin: n, y, x });
                }
                prev = c;
            }
        }
        Ok(())
    }
}

/// Per-pixel distribution over bins, `N×H×W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVolume {
    n_bins: usize,
    height: usize,
    width: usize,
    probs: Vec<f64>,
}

impl ProbabilityVolume {
    pub fn new(n_bins: usize, height: usize, width: usize, probs: Vec<f64>) -> Result<Self> {
        let vol = Self { n_bins, height, width, probs };
        vol.validate()?;
        Ok(vol)
    }

    pub fn uniform(n_bins: usize, height: usize, width: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidParam("n_bins must be at least 1".into()));
        }
        Self::new(n_bins, height, width, vec![1.0 / n_bins as f64; n_bins * height * width])
    }

    /// All mass on the indexed bin at each pixel.
    pub fn one_hot(indices: &BinIndexMap) -> Result<Self> {
        let (n_bins, h, w) = (indices.n_bins(), indices.height(), indices.width());
        let stride = h * w;
        let mut probs = vec![0.0; n_bins * stride];
        for (p, &n) in indices.indices().iter().enumerate() {
            probs[n * stride + p] = 1.0;
        }
        Self::new(n_bins, h, w, probs)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        Shape::chw(self.n_bins, self.height, self.width)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, n: usize, p: usize) -> f64 {
        self.probs[n * self.height * self.width + p]
    }

    /// Shannon entropy (nats) of each pixel's distribution.
    pub fn entropy(&self) -> Vec<f64> {
        let stride = self.height * self.width;
        (0..stride)
            .map(|p| {
                (0..self.n_bins)
                    .map(|n| self.probs[n * stride + p])
                    .filter(|&q| q > 0.0)
                    .map(|q| -q * q.ln())
                    .sum()
            })
            .collect()
    }
}

impl Validate for ProbabilityVolume {
    fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::InvalidParam("n_bins must be at least 1".into()));
        }
        check_dims(self.height, self.width)?;
        check_len(self.shape(), self.probs.len())?;
        let stride = self.height * self.width;
        for p in 0..stride {
            let (y, x) = pixel_yx(p, self.width);
            let mut sum = 0.0;
            for n in 0..self.n_bins {
                let q = self.probs[n * stride + p];
                if !q.is_finite() {
                    return Err(Error::NonFinite { field: "probability", y, x });
                }
                if q < 0.0 {
                    return Err(Error::NegativeProbability { bin: n, y, x, value: q });
                }
                sum += q;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(Error::UnnormalizedProbability { y, x, sum });
            }
        }
        Ok(())
    }
}

/// Per-pixel target-bin index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinIndexMap {
    n_bins: usize,
    height: usize,
    width: usize,
    indices: Vec<usize>,
    clamped: usize,
}

impl BinIndexMap {
    pub fn new(n_bins: usize, height: usize, width: usize, indices: Vec<usize>) -> Result<Self> {
        Self::with_clamped(n_bins, height, width, indices, 0)
    }

    pub(crate) fn with_clamped(
        n_bins: usize,
        height: usize,
        width: usize,
        indices: Vec<usize>,
        clamped: usize,
    ) -> Result<Self> {
        let map = Self { n_bins, height, width, indices, clamped };
        map.validate()?;
        Ok(map)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        Shape::hw(self.height, self.width)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn get(&self, p: usize) -> usize {
        self.indices[p]
    }

    /// Number of pixels whose depth fell outside the range and was clamped.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }
}

impl Validate for BinIndexMap {
    fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::InvalidParam("n_bins must be at least 1".into()));
        }
        check_dims(self.height, self.width)?;
        check_len(self.shape(), self.indices.len())?;
        for (p, &n) in self.indices.iter().enumerate() {
            if n >= self.n_bins {
                let (y, x) = pixel_yx(p, self.width);
                return Err(Error::IndexOutOfRange { y, x, index: n, n_bins: self.n_bins });
            }
        }
        Ok(())
    }
}

/// Model hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Bins per stage.
    pub n_bins: usize,
    /// Refinement stages.
    pub n_stages: usize,
    /// Error-tolerance coefficient scaling the local degradation spread.
    pub gamma: f64,
    /// Side of the square window used for degradation statistics.
    pub neighborhood_k: usize,
    /// Weight of the Chamfer bin regulariser in the total loss.
    pub alpha: f64,
    pub hidden_channels: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_bins: 32,
            n_stages: 4,
            gamma: 0.2,
            neighborhood_k: 3,
            alpha: 0.1,
            hidden_channels: 64,
            seed: 0,
        }
    }
}

impl Validate for HyperParams {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_string()));
        if self.n_bins == 0 {
            return bad("n_bins must be at least 1");
        }
        if self.n_stages == 0 {
            return bad("n_stages must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and non-negative");
        }
        if self.neighborhood_k == 0 || self.neighborhood_k.is_multiple_of(2) {
            return bad("neighborhood_k must be odd");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and non-negative");
        }
        if self.hidden_channels == 0 {
            return bad("hidden_channels must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_probabilities_pass() {
        let vol = ProbabilityVolume::new(2, 1, 2, vec![0.3, 0.5, 0.7, 0.5]);
        assert!(vol.is_ok());
    }

    #[test]
    fn unnormalized_probability_is_reported_at_first_pixel() {
        let err = ProbabilityVolume::new(2, 1, 2, vec![0.5, 0.4, 0.5, 0.5]).unwrap_err();
        match err {
            Error::UnnormalizedProbability { y, x, sum } => {
                assert_eq!((y, x), (0, 1));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_probability_rejected() {
        let err = ProbabilityVolume::new(2, 1, 1, vec![-0.1, 1.1]).unwrap_err();
        assert!(matches!(err, Error::NegativeProbability { bin: 0, .. }));
    }

    #[test]
    fn non_finite_depth_rejected_only_when_valid() {
        let err = DepthMap::new(1, 2, vec![1.0, f64::NAN], vec![true, true]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { y: 0, x: 1, .. }));
        assert!(DepthMap::new(1, 2, vec![1.0, f64::NAN], vec![true, false]).is_ok());
    }

    #[test]
    fn mask_shape_mismatch() {
        let err = DepthMap::new(2, 2, vec![1.0; 4], vec![true; 3]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn inverted_partition_rejected() {
        assert!(matches!(
            BinPartition::broadcast(4, 1, 1, 2.0, 1.0),
            Err(Error::InvertedRange { .. })
        ));
        assert!(BinPartition::broadcast(0, 1, 1, 1.0, 2.0).is_err());
    }

    #[test]
    fn bin_index_out_of_range() {
        assert!(BinIndexMap::new(3, 1, 2, vec![0, 3]).is_err());
    }

    #[test]
    fn default_hyper_params() {
        let hp = HyperParams::default();
        assert_eq!((hp.n_bins, hp.n_stages, hp.neighborhood_k), (32, 4, 3));
        assert_eq!(hp.gamma, 0.2);
        assert_eq!(hp.alpha, 0.1);
        hp.validate().unwrap();
        let even = HyperParams { neighborhood_k: 4, ..hp };
        assert!(even.validate().is_err());
    }

    #[test]
    fn concat_keeps_channel_order() {
        let a = FeatureMap::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let b = FeatureMap::new(2, 1, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let q = FeatureMap::concat(&[&a, &b]).unwrap();
        assert_eq!(q.channels(), 3);
        assert_eq!(q.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = FeatureMap::zeros(1, 2, 2);
        assert!(FeatureMap::concat(&[&a, &c]).is_err());
    }
}
