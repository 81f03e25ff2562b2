//! TOML run configuration and the file-backed feature provider.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::probhead::ProbHeadWeights;
use crate::refine::{
    refine_multistage, residual_degradation_provider, small_encoder_provider, FeatureProvider, ProviderOutput,
    RefineTrace, LAYER_COUNT,
};
use crate::types::{DepthMap, FeatureMap, HyperParams, Validate};

use super::tensor::{read_tensors, weights_from_tensors, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    SmallEncoder,
    ExternalFile,
}

/// Settings for `refine`.
///
/// ```toml
/// provider = "small-encoder"
/// encoder_channels = 16
/// smooth_k = 3
/// # weights = "weights.dgbw"
///
/// [hyper]
/// n_bins = 32
/// n_stages = 4
/// ```
///
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hyper: HyperParams,
    pub provider: ProviderKind,
    pub encoder_channels: usize,
    /// Box window of the residual degradation proxy.
    pub smooth_k: usize,
    /// Tensor file for the `external-file` provider.
    pub features: Option<PathBuf>,
    /// Tensor file with per-stage head weights; seeded weights otherwise.
    pub weights: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::default(),
            provider: ProviderKind::SmallEncoder,
            encoder_channels: 16,
            smooth_k: 3,
            features: None,
            weights: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidParam(format!("config: {}", e.message())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.features, &mut cfg.weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.encoder_channels == 0 {
            return Err(Error::InvalidParam("encoder_channels must be positive".into()));
        }
        if self.smooth_k == 0 || self.smooth_k.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!("smooth_k must be odd, got {}", self.smooth_k)));
        }
        if self.provider == ProviderKind::ExternalFile && self.features.is_none() {
            return Err(Error::InvalidParam("external-file provider needs `features`".into()));
        }
        Ok(())
    }

    /// Runs the configured pipeline.
    pub fn run(&self, color: &FeatureMap, lr_depth: &DepthMap) -> Result<(DepthMap, RefineTrace)> {
        self.check()?;
        let hp = &self.hyper;
        let dp = residual_degradation_provider(self.smooth_k)?;
        let (provider, stage_channels): (Box<dyn FeatureProvider>, Vec<usize>) = match self.provider {
            ProviderKind::SmallEncoder => {
                let enc = small_encoder_provider(hp.seed, self.encoder_channels)?;
                let c = enc.stage_context_channels();
                (Box::new(enc), vec![c; hp.n_stages])
            }
            ProviderKind::ExternalFile => {
                let path = self.features.as_ref().expect("checked above");
                let ext = ExternalFeatures::load(path)?;
                let c = (0..hp.n_stages).map(|i| ext.stage_context_channels(i)).collect();
                (Box::new(ext), c)
            }
        };
        let weights = match &self.weights {
            Some(path) => weights_from_tensors(&read_tensors(path)?, hp.n_stages)?,
            None => stage_channels
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    ProbHeadWeights::seeded(hp.n_bins, hp.hidden_channels, c, hp.seed.wrapping_add(1 + i as u64))
                })
                .collect(),
        };
        for (i, (w, &c)) in weights.iter().zip(&stage_channels).enumerate() {
            if w.n_bins() != hp.n_bins || w.context_channels() != c {
                return Err(Error::InvalidParam(format!(
                    "stage {i} weights expect {} bins and {} context channels, run has {} and {c}",
                    w.n_bins(),
                    w.context_channels(),
                    hp.n_bins
                )));
            }
        }
        refine_multistage(color, lr_depth, provider.as_ref(), &dp, &weights, hp, None)
    }
}

/// Precomputed features read from a tensor file holding `context`
/// `[C, H, W]`, `layer0`..`layer3` `[C_i, H, W]` and `initial_depth`
/// `[H, W]` (non-finite entries are invalid pixels).
#[derive(Debug, Clone)]
pub struct ExternalFeatures {
    output: ProviderOutput,
}

fn feature_tensor(t: &Tensor) -> Result<FeatureMap> {
    let [c, h, w]: [usize; 3] = t
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::Malformed(format!("{} must be 3-D", t.name)))?;
    FeatureMap::new(c, h, w, t.data.clone())
}

impl ExternalFeatures {
    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        let find = |name: &str| {
            tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Malformed(format!("feature file lacks {name}")))
        };
        let context = feature_tensor(find("context")?)?;
        let layer_feats = (0..LAYER_COUNT)
            .map(|i| feature_tensor(find(&format!("layer{i}"))?))
            .collect::<Result<Vec<_>>>()?;
        let init = find("initial_depth")?;
        let [h, w]: [usize; 2] = init
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Malformed("initial_depth must be 2-D".into()))?;
        let valid: Vec<bool> = init.data.iter().map(|v| v.is_finite() && *v >= 0.0).collect();
        let values = init.data.iter().zip(&valid).map(|(&v, &ok)| if ok { v } else { 0.0 }).collect();
        let initial_depth = DepthMap::new(h, w, values, valid)?;
        for f in std::iter::once(&context).chain(&layer_feats) {
            check_shape(initial_depth.shape(), f.spatial_shape())?;
        }
        Ok(Self { output: ProviderOutput { context, layer_feats, initial_depth } })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensors(&read_tensors(path)?)
    }

    /// Channels seen by stage `i` (context plus its layer feature).
    pub fn stage_context_channels(&self, i: usize) -> usize {
        let o = &self.output;
        o.context.channels() + o.layer_feats[i % o.layer_feats.len()].channels()
    }
}

impl FeatureProvider for ExternalFeatures {
    fn produce(&self, color: &FeatureMap, _lr_depth: &DepthMap) -> Result<ProviderOutput> {
        check_shape(color.spatial_shape(), self.output.initial_depth.shape())?;
        Ok(self.output.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg = RunConfig::from_toml("smooth_k = 5\n[hyper]\nn_bins = 8\n").unwrap();
        assert_eq!(cfg.smooth_k, 5);
        assert_eq!(cfg.hyper.n_bins, 8);
        assert_eq!(cfg.hyper.n_stages, 4);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("smooth_k = 4").is_err());
        assert!(RunConfig::from_toml("[hyper]\ngamma = -1.0").is_err());
        assert!(RunConfig::from_toml("provider = \"external-file\"").is_err());
    }

    #[test]
    fn external_features_shapes() {
        let mut ts = vec![Tensor::new("context", vec![2, 2, 3], vec![0.5; 12]).unwrap()];
        for i in 0..LAYER_COUNT {
            ts.push(Tensor::new(format!("layer{i}"), vec![i + 1, 2, 3], vec![0.1; 6 * (i + 1)]).unwrap());
        }
        ts.push(Tensor::new("initial_depth", vec![2, 3], vec![1.0, f64::NAN, 2.0, 3.0, 4.0, 5.0]).unwrap());
        let ext = ExternalFeatures::from_tensors(&ts).unwrap();
        assert_eq!(ext.stage_context_channels(0), 3);
        assert_eq!(ext.stage_context_channels(5), 4);
        assert!(!ext.output.initial_depth.is_valid(0, 1));
        let wrong = FeatureMap::zeros(3, 3, 3);
        assert!(ext.produce(&wrong, &ext.output.initial_depth).is_err());
    }
}
