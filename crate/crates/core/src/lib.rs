//! Degradation-driven adaptive binning for depth map super-resolution.
//!
//! Depth is predicted as a probability-weighted sum of per-pixel bin centres.
//! Over several stages the bin range at each pixel shrinks to the bin that
//! holds the current estimate, widened in proportion to how degraded the
//! neighbourhood looks, so the estimate is refined coarse to fine.
//!
//! Modules, bottom up:
//! - [`types`]: validated grids shared by everything else.
//! - [`binning`]: partitioning, bin centres, weighted combination, target bin
//!   lookup and degradation-driven range adjustment.
//! - [`probhead`]: the convolutional probability head (projection, hidden
//!   state, modulated deformable update, GRU step, softmax).
//! - [`refine`]: the stage driver and pluggable feature/degradation providers.
//! - [`loss`]: reconstruction and Chamfer bin losses, evaluation metrics.
//! - [`gradcheck`]: analytic gradients of the logits-to-loss tail and a
//!   finite-difference checker.
//! - [`degrade`]: bicubic resampling, blur and noise for synthetic LR inputs.
//! - [`io`]: depth/colour/tensor file formats, heatmaps and run configuration.
//! - [`cli`]: the command-line front end.

pub mod binning;
pub mod cli;
pub mod conv;
pub mod degrade;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod loss;
pub mod probhead;
pub mod refine;
pub mod types;

pub use error::{Error, Result, Shape};
pub use types::{
    BinIndexMap, BinPartition, CandidateVolume, DegradationMap, DepthMap, FeatureMap, HyperParams,
    ProbabilityVolume, Validate,
};
