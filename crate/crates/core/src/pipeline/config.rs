use serde::{Deserialize, Serialize};

use crate::dynamics::DeformConfig;
use crate::{Error, Result};

/// Adam learning rate per parameter group. `position` is multiplied by the
/// scene scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub position: f64,
    pub rotation: f64,
    pub log_scale: f64,
    pub opacity: f64,
    pub sh: f64,
    pub deform_net: f64,
    pub score_net: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            position: 1.6e-4,
            rotation: 1e-3,
            log_scale: 5e-3,
            opacity: 5e-2,
            sh: 2.5e-3,
            deform_net: 1e-3,
            score_net: 1e-3,
        }
    }
}

/// `λ₁·L1 + λ_s·(1 − SSIM)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub l1: f64,
    pub ssim: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { l1: 1.0, ssim: 1.0 }
    }
}

impl LossWeights {
    /// The 0.8 / 0.2 split common in splatting codebases.
    pub fn splatting_preset() -> Self {
        LossWeights { l1: 0.8, ssim: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    /// Neighborhood radius as a multiple of the median nearest-neighbor
    /// distance of normalized positions.
    pub eps_factor: f64,
    pub min_pts: usize,
    pub feature_weight: f64,
    pub vote_threshold: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps_factor: 3.0,
            min_pts: 8,
            feature_weight: 0.25,
            vote_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorMapParams {
    /// Per-frame percentile used as the normalizer.
    pub percentile: f64,
    /// Lower bound on the normalizer, so near-perfect frames are not blown up
    /// into full-scale noise.
    pub floor: f64,
}

impl Default for ErrorMapParams {
    fn default() -> Self {
        ErrorMapParams { percentile: 0.99, floor: 0.08 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub hidden_dims: Vec<usize>,
    pub iters: usize,
    /// Supervise every n-th pixel in both directions.
    pub pixel_stride: usize,
    /// Pixels whose rendered alpha is below this are not supervised.
    pub min_alpha: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            hidden_dims: vec![64, 64],
            iters: 500,
            pixel_stride: 2,
            min_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub opacity_threshold: f64,
    /// Iterations between prunes; 0 disables pruning.
    pub interval: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            opacity_threshold: 0.005,
            interval: 500,
        }
    }
}

/// Every knob of [`generate_scene`](super::generate_scene). Any field may be
/// omitted from the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Pixel subsampling for initialization, in both directions.
    pub subsample_stride: usize,
    /// Only every n-th reference frame contributes initial Gaussians.
    pub frame_stride: usize,
    pub sh_degree: usize,
    pub background: [f64; 3],
    pub prepass_iters: usize,
    pub hybrid_iters: usize,
    pub learning_rates: LearningRates,
    pub loss: LossWeights,
    /// Dynamic iff score > τ.
    pub tau: f64,
    pub clustering: ClusterParams,
    pub error_maps: ErrorMapParams,
    pub score: ScoreConfig,
    pub deform: DeformConfig,
    pub prune: PruneConfig,
    /// Reference frames excluded from every optimization stage.
    pub holdout_frames: Vec<usize>,
    /// Skip decomposition and make every Gaussian time-dependent.
    pub all_deformable: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            subsample_stride: 4,
            frame_stride: 1,
            sh_degree: 1,
            background: [0.0; 3],
            prepass_iters: 3000,
            hybrid_iters: 3000,
            learning_rates: LearningRates::default(),
            loss: LossWeights::default(),
            tau: 0.5,
            clustering: ClusterParams::default(),
            error_maps: ErrorMapParams::default(),
            score: ScoreConfig::default(),
            deform: DeformConfig::default(),
            prune: PruneConfig::default(),
            holdout_frames: Vec::new(),
            all_deformable: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let lr = &self.learning_rates;
        let nonneg = [
            ("learning_rates.position", lr.position),
            ("learning_rates.rotation", lr.rotation),
            ("learning_rates.log_scale", lr.log_scale),
            ("learning_rates.opacity", lr.opacity),
            ("learning_rates.sh", lr.sh),
            ("learning_rates.deform_net", lr.deform_net),
            ("learning_rates.score_net", lr.score_net),
            ("loss.l1", self.loss.l1),
            ("loss.ssim", self.loss.ssim),
            ("clustering.eps_factor", self.clustering.eps_factor),
            ("clustering.feature_weight", self.clustering.feature_weight),
            ("error_maps.floor", self.error_maps.floor),
            ("prune.opacity_threshold", self.prune.opacity_threshold),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a finite value ≥ 0, got {v}")));
            }
        }
        if self.subsample_stride == 0 || self.frame_stride == 0 {
            return Err(Error::invalid("strides must be ≥ 1"));
        }
        if self.sh_degree > 3 {
            return Err(Error::invalid("sh_degree must be in 0..=3"));
        }
        if !(0.0..=1.0).contains(&self.error_maps.percentile) {
            return Err(Error::invalid("error_maps.percentile must be in [0, 1]"));
        }
        if self.score.pixel_stride == 0 {
            return Err(Error::invalid("score.pixel_stride must be ≥ 1"));
        }
        if self.score.hidden_dims.contains(&0) || self.deform.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be ≥ 1"));
        }
        Ok(())
    }
}
