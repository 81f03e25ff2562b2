//! Multi-stage coarse-to-fine refinement.
//!
//! Each stage re-bins the current estimate, narrows the range to the target
//! bin widened by the local degradation spread, and predicts a distribution
//! over the narrowed bins. The stage output is `X_{i+1} = X_i + r` where the
//! residual `r` is the probability-weighted candidate minus `X_i`, so the
//! new estimate is always inside the narrowed range.
//!
//! Feature extraction and degradation estimation are pluggable through
//! [`FeatureProvider`] and [`DegradationProvider`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binning::{adjust_range, bin_centers, combine, local_variance, locate_target_bin, partition_uniform};
use crate::conv::{map_features, relu, Conv2d, Padding};
use crate::degrade::bicubic_resample;
use crate::error::{check_shape, Error, Result};
use crate::probhead::ProbHeadWeights;
use crate::types::{
    BinIndexMap, BinPartition, CandidateVolume, DegradationMap, DepthMap, FeatureMap, HyperParams,
    ProbabilityVolume, Validate,
};

/// Number of layer features a provider returns.
pub const LAYER_COUNT: usize = 4;

/// Everything one stage consumes.
#[derive(Debug, Clone)]
pub struct StageInputs {
    pub coarse: DepthMap,
    pub layer_feat: FeatureMap,
    pub degradation: DegradationMap,
    pub context: FeatureMap,
}

impl StageInputs {
    pub fn new(
        coarse: DepthMap,
        layer_feat: FeatureMap,
        degradation: DegradationMap,
        context: FeatureMap,
    ) -> Result<Self> {
        let shape = coarse.shape();
        check_shape(shape, layer_feat.spatial_shape())?;
        check_shape(shape, degradation.shape())?;
        check_shape(shape, context.spatial_shape())?;
        Ok(Self { coarse, layer_feat, degradation, context })
    }

    /// Context followed by the layer feature.
    pub fn features(&self) -> Result<FeatureMap> {
        FeatureMap::concat(&[&self.context, &self.layer_feat])
    }
}

/// Features and an initial estimate on the target HR grid.
#[derive(Debug, Clone)]
pub struct ProviderOutput {
    pub context: FeatureMap,
    pub layer_feats: Vec<FeatureMap>,
    pub initial_depth: DepthMap,
}

pub trait FeatureProvider {
    /// `color` is a 3-channel image in `[0, 1]` at the output resolution.
    fn produce(&self, color: &FeatureMap, lr_depth: &DepthMap) -> Result<ProviderOutput>;
}

pub trait DegradationProvider {
    fn estimate(&self, coarse: &DepthMap, reference: &DepthMap) -> Result<DegradationMap>;
}

/// Anything that can assign probabilities to a stage's candidates.
pub trait ProbabilityEstimator {
    fn estimate_probs(&self, centers: &CandidateVolume, inputs: &StageInputs) -> Result<ProbabilityVolume>;
}

impl ProbabilityEstimator for ProbHeadWeights {
    fn estimate_probs(&self, centers: &CandidateVolume, inputs: &StageInputs) -> Result<ProbabilityVolume> {
        self.estimate(centers, &inputs.features()?, &inputs.degradation)
    }
}

/// Result of one stage.
#[derive(Debug, Clone)]
pub struct StageOutput {
    /// `X_{i+1}`.
    pub depth: DepthMap,
    /// `X_{i+1} - X_i` per pixel.
    pub residual: Vec<f64>,
    /// The narrowed range the candidates were drawn from.
    pub partition: BinPartition,
    pub probs: ProbabilityVolume,
    /// Target bin in the incoming partition.
    pub target: BinIndexMap,
}

/// Diagnostics collected across stages.
#[derive(Debug, Clone, Default)]
pub struct RefineTrace {
    pub per_stage_depths: Vec<DepthMap>,
    pub per_stage_partitions: Vec<BinPartition>,
    pub per_stage_probs: Vec<ProbabilityVolume>,
}

/// One refinement stage.
///
/// `partition` is the range binned around the current estimate and `prior`
/// the distribution over its bins that locates the target bin.
pub fn ddb_stage(
    inputs: &StageInputs,
    partition: &BinPartition,
    prior: &ProbabilityVolume,
    estimator: &(impl ProbabilityEstimator + ?Sized),
    hp: &HyperParams,
) -> Result<StageOutput> {
    hp.validate()?;
    let coarse = &inputs.coarse;
    check_shape(coarse.shape(), partition.shape())?;
    if partition.n_bins() != hp.n_bins {
        return Err(Error::InvalidParam(format!(
            "partition has {} bins, hyper-parameters say {}",
            partition.n_bins(),
            hp.n_bins
        )));
    }

    let prior_centers = bin_centers(partition);
    let located = combine(&prior_centers, prior)?;
    let located = DepthMap::new(
        coarse.height(),
        coarse.width(),
        located.into_parts().2,
        coarse.valid_mask().to_vec(),
    )?;
    let target = locate_target_bin(partition, &located)?;
    let stats = local_variance(&inputs.degradation, hp.neighborhood_k)?;
    let adjusted = adjust_range(partition, &target, &stats.sigma, hp.gamma)?;

    let centers = bin_centers(&adjusted);
    let probs = estimator.estimate_probs(&centers, inputs)?;
    check_shape(centers.shape(), probs.shape())?;
    let combined = combine(&centers, &probs)?;

    let residual: Vec<f64> = combined.values().iter().zip(coarse.values()).map(|(c, x)| c - x).collect();
    let depth = DepthMap::new(
        coarse.height(),
        coarse.width(),
        combined.into_parts().2,
        coarse.valid_mask().to_vec(),
    )?;
    Ok(StageOutput { depth, residual, partition: adjusted, probs, target })
}

/// Features shared by all stages of one image.
#[derive(Debug, Clone)]
pub struct StageFeatures {
    pub context: FeatureMap,
    pub layer_feats: Vec<FeatureMap>,
}

/// Chains `estimators.len()` stages starting from `x1`, the given partition
/// and prior. Each stage hands its narrowed partition and probabilities to
/// the next. Stage `i` uses layer feature `i % layer_feats.len()`.
#[allow(clippy::too_many_arguments)]
pub fn run_stages<E: ProbabilityEstimator + ?Sized>(
    x1: &DepthMap,
    partition: BinPartition,
    prior: ProbabilityVolume,
    features: &StageFeatures,
    reference: &DepthMap,
    dp: &dyn DegradationProvider,
    estimators: &[&E],
    hp: &HyperParams,
) -> Result<(DepthMap, RefineTrace)> {
    if features.layer_feats.is_empty() {
        return Err(Error::Provider("provider returned no layer features".into()));
    }
    let mut trace = RefineTrace::default();
    let mut x = x1.clone();
    let mut partition = partition;
    let mut prior = prior;
    for (i, est) in estimators.iter().enumerate() {
        let degradation = dp.estimate(&x, reference)?;
        let layer = &features.layer_feats[i % features.layer_feats.len()];
        let inputs = StageInputs::new(x, layer.clone(), degradation, features.context.clone())?;
        let out = ddb_stage(&inputs, &partition, &prior, *est, hp)?;
        trace.per_stage_depths.push(out.depth.clone());
        trace.per_stage_partitions.push(out.partition.clone());
        trace.per_stage_probs.push(out.probs.clone());
        x = out.depth;
        partition = out.partition;
        prior = out.probs;
    }
    Ok((x, trace))
}

/// Full pipeline from an LR depth map and a colour image.
///
/// The initial estimate is the bicubic upsampling of `lr_depth` to the colour
/// grid. Stage 1 bins the image-wide valid range of that estimate with all
/// prior mass on the bin containing it. Degradation is measured against
/// `reference` when given, otherwise against the provider's initial depth.
pub fn refine_multistage(
    color: &FeatureMap,
    lr_depth: &DepthMap,
    fp: &dyn FeatureProvider,
    dp: &dyn DegradationProvider,
    weights: &[ProbHeadWeights],
    hp: &HyperParams,
    reference: Option<&DepthMap>,
) -> Result<(DepthMap, RefineTrace)> {
    hp.validate()?;
    if weights.len() != hp.n_stages {
        return Err(Error::InvalidParam(format!(
            "{} weight sets for {} stages",
            weights.len(),
            hp.n_stages
        )));
    }
    if color.channels() != 3 {
        return Err(Error::InvalidParam(format!("colour image has {} channels, expected 3", color.channels())));
    }
    let provided = fp.produce(color, lr_depth)?;
    let grid = color.spatial_shape();
    check_shape(grid, provided.context.spatial_shape())?;
    check_shape(grid, provided.initial_depth.shape())?;
    for f in &provided.layer_feats {
        check_shape(grid, f.spatial_shape())?;
    }

    let x1 = bicubic_resample(lr_depth, grid.height, grid.width)?;
    let partition = partition_uniform(&x1, hp.n_bins)?;
    let prior = ProbabilityVolume::one_hot(&locate_target_bin(&partition, &x1)?)?;
    let reference = reference.unwrap_or(&provided.initial_depth);
    let features = StageFeatures { context: provided.context, layer_feats: provided.layer_feats };
    let estimators: Vec<&ProbHeadWeights> = weights.iter().collect();
    run_stages(&x1, partition, prior, &features, reference, dp, &estimators, hp)
}

/// Seeded per-stage probability-head weights matching a provider's channels.
pub fn seeded_stage_weights(hp: &HyperParams, context_channels: usize) -> Vec<ProbHeadWeights> {
    (0..hp.n_stages)
        .map(|i| {
            ProbHeadWeights::seeded(
                hp.n_bins,
                hp.hidden_channels,
                context_channels,
                hp.seed.wrapping_add(1 + i as u64),
            )
        })
        .collect()
}

/// Four-layer conv+ReLU encoder over `[colour; upsampled depth]`.
///
/// Depth enters normalised by its largest valid value. The context feature
/// is the last layer's output. Padding replicates edges so constant inputs
/// give spatially constant features.
#[derive(Debug, Clone)]
pub struct SmallEncoder {
    layers: [Conv2d; LAYER_COUNT],
}

pub fn small_encoder_provider(seed: u64, channels: usize) -> Result<SmallEncoder> {
    if channels == 0 {
        return Err(Error::InvalidParam("encoder needs at least one channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SmallEncoder {
        layers: [
            Conv2d::seeded(4, channels, 3, &mut rng),
            Conv2d::seeded(channels, channels, 3, &mut rng),
            Conv2d::seeded(channels, channels, 3, &mut rng),
            Conv2d::seeded(channels, channels, 3, &mut rng),
        ],
    })
}

impl SmallEncoder {
    pub fn channels(&self) -> usize {
        self.layers[0].out_channels()
    }

    pub fn layers(&self) -> &[Conv2d; LAYER_COUNT] {
        &self.layers
    }

    /// Context plus one layer feature, as seen by each stage.
    pub fn stage_context_channels(&self) -> usize {
        2 * self.channels()
    }

    /// Encoder input: colour channels followed by normalised depth.
    pub fn encoder_input(color: &FeatureMap, upsampled: &DepthMap) -> Result<FeatureMap> {
        check_shape(color.spatial_shape(), upsampled.shape())?;
        let scale = upsampled.valid_range().map(|(_, hi)| hi).filter(|&hi| hi > 0.0).unwrap_or(1.0);
        let depth: Vec<f64> = upsampled
            .values()
            .iter()
            .zip(upsampled.valid_mask())
            .map(|(&v, &ok)| if ok { v / scale } else { 0.0 })
            .collect();
        let depth = FeatureMap::new(1, upsampled.height(), upsampled.width(), depth)?;
        FeatureMap::concat(&[color, &depth])
    }
}

impl FeatureProvider for SmallEncoder {
    fn produce(&self, color: &FeatureMap, lr_depth: &DepthMap) -> Result<ProviderOutput> {
        let initial_depth = bicubic_resample(lr_depth, color.height(), color.width())?;
        let mut feat = Self::encoder_input(color, &initial_depth)?;
        let mut layer_feats = Vec::with_capacity(LAYER_COUNT);
        for conv in &self.layers {
            feat = map_features(conv.forward_padded(&feat, Padding::Replicate)?, relu);
            layer_feats.push(feat.clone());
        }
        Ok(ProviderOutput { context: feat, layer_feats, initial_depth })
    }
}

/// Degradation proxy: box-filtered absolute residual, normalised to mean ~1.
#[derive(Debug, Clone, Copy)]
pub struct ResidualDegradation {
    smooth_k: usize,
}

/// Added to the mean before normalising.
pub const DEGRADATION_EPS: f64 = 1e-8;

pub fn residual_degradation_provider(smooth_k: usize) -> Result<ResidualDegradation> {
    if smooth_k == 0 || smooth_k.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("smoothing window must be odd, got {smooth_k}")));
    }
    Ok(ResidualDegradation { smooth_k })
}

/// Mean over the `k×k` window, truncated at the border.
pub fn box_filter(values: &[f64], height: usize, width: usize, k: usize) -> Vec<f64> {
    let r = k / 2;
    let mut out = vec![0.0; height * width];
    for y in 0..height {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(height - 1));
        for x in 0..width {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(width - 1));
            let mut sum = 0.0;
            for yy in y0..=y1 {
                sum += values[yy * width + x0..=yy * width + x1].iter().sum::<f64>();
            }
            out[y * width + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
        }
    }
    out
}

impl DegradationProvider for ResidualDegradation {
    fn estimate(&self, coarse: &DepthMap, reference: &DepthMap) -> Result<DegradationMap> {
        check_shape(coarse.shape(), reference.shape())?;
        let residual: Vec<f64> = coarse
            .values()
            .iter()
            .zip(reference.values())
            .zip(coarse.valid_mask().iter().zip(reference.valid_mask()))
            .map(|((a, b), (&va, &vb))| if va && vb { (a - b).abs() } else { 0.0 })
            .collect();
        let smoothed = box_filter(&residual, coarse.height(), coarse.width(), self.smooth_k);
        let mean = smoothed.iter().sum::<f64>() / smoothed.len() as f64;
        let values = smoothed.into_iter().map(|v| v / (mean + DEGRADATION_EPS)).collect();
        DegradationMap::new(coarse.height(), coarse.width(), values)
    }
}

/// Degradation provider that always reports zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDegradation;

impl DegradationProvider for NoDegradation {
    fn estimate(&self, coarse: &DepthMap, _reference: &DepthMap) -> Result<DegradationMap> {
        Ok(DegradationMap::zeros(coarse.height(), coarse.width()))
    }
}
