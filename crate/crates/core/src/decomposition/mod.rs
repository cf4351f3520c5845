//! Self-supervised static/dynamic separation. All Gaussians are first fitted
//! as if static; the photometric residual that remains marks moving content.
//! A small network maps each Gaussian to a score whose splat is trained to
//! match those residuals, scores are thresholded, and density clusters vote
//! so objects switch label as a whole.

mod cluster;
mod error_maps;
mod score;

pub use cluster::{cluster_group, dbscan, vote, Grouping};
pub use error_maps::{compute_error_maps, ErrorMapSet};
pub use score::{build_supervision, score_inputs, score_loss_and_grad, score_net_spec, splatted_bce, train_score_field, FrameSupervision, ScoreField};

use serde::{Deserialize, Serialize};

use crate::pipeline::{render_options, PipelineConfig, StageMetrics, Trainer};
use crate::raster::{render, GaussianSnapshot};
use crate::scene::{Gaussian3D, HybridScene, ReferenceBundle};
use crate::{Error, Real, Result};

/// Fits every Gaussian as time-independent against the listed frames.
/// No pruning happens here so indices stay aligned with the input.
pub fn optimize_static_prepass<T: Real>(
    gaussians: Vec<Gaussian3D<T>>,
    bundle: &ReferenceBundle<T>,
    frames: &[usize],
    scene_scale: T,
    scene_center: [T; 3],
    config: &PipelineConfig,
) -> Result<(Vec<Gaussian3D<T>>, StageMetrics)> {
    if gaussians.is_empty() {
        return Err(Error::invalid("static pre-pass needs at least one Gaussian"));
    }
    if frames.len() < 2 {
        log::warn!("static pre-pass on a single frame degenerates to a per-view fit");
    }
    let scene = HybridScene::static_only(gaussians, bundle.len(), scene_scale, scene_center, config.sh_degree);
    let mut trainer = Trainer::new(bundle, frames.to_vec(), scene, config, false)?;
    let metrics = trainer.run_stage("static_prepass", config.prepass_iters, config.background)?;
    Ok((trainer.scene.static_gaussians, metrics))
}

/// `S > τ`, strictly.
pub fn threshold_split<T: Real>(scores: &[T], tau: f64) -> Vec<bool> {
    let tau = T::lit(tau);
    scores.iter().map(|&s| s > tau).collect()
}

/// Per-Gaussian decomposition outcome, index-aligned with the input set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub scores: Vec<f64>,
    pub threshold_labels: Vec<bool>,
    pub grouped_labels: Vec<bool>,
    pub cluster_ids: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub index: usize,
    pub score: f64,
    pub dynamic: bool,
    pub threshold_dynamic: bool,
    /// `-1` marks noise.
    pub cluster: i64,
}

impl DecompositionResult {
    pub fn dynamic_count(&self) -> usize {
        self.grouped_labels.iter().filter(|l| **l).count()
    }

    pub fn sidecar(&self) -> Vec<SidecarEntry> {
        (0..self.scores.len())
            .map(|i| SidecarEntry {
                index: i,
                score: self.scores[i],
                dynamic: self.grouped_labels[i],
                threshold_dynamic: self.threshold_labels[i],
                cluster: self.cluster_ids[i].map_or(-1, |c| c as i64),
            })
            .collect()
    }
}

/// Error maps → score field → threshold → grouping, on geometry already
/// fitted by the static pre-pass.
pub fn decompose<T: Real>(
    fitted: &[Gaussian3D<T>],
    bundle: &ReferenceBundle<T>,
    frames: &[usize],
    scene_scale: T,
    scene_center: [T; 3],
    config: &PipelineConfig,
) -> Result<(DecompositionResult, ErrorMapSet<T>)> {
    let snap = GaussianSnapshot::from_gaussians(fitted, config.sh_degree)?;
    let opts = render_options::<T>(config.background);
    let mut renders = Vec::with_capacity(frames.len());
    let mut refs = Vec::with_capacity(frames.len());
    for &f in frames {
        renders.push(render(&snap, &bundle.frames[f].pose, &opts)?.color);
        refs.push(bundle.frames[f].image.clone());
    }
    let maps = compute_error_maps(&renders, &refs, &config.error_maps)?;
    let poses: Vec<_> = frames.iter().map(|&f| &bundle.frames[f].pose).collect();
    let sup = build_supervision(&snap, &poses, &maps, &opts, &config.score)?;
    let field = train_score_field(fitted, scene_center, scene_scale, &sup, &config.score, config.learning_rates.score_net, config.seed)?;
    let threshold_labels = threshold_split(&field.scores, config.tau);
    let grouping = cluster_group(fitted, &threshold_labels, scene_center, scene_scale, &config.clustering)?;
    let result = DecompositionResult {
        scores: field.scores.iter().map(|s| s.as_f64()).collect(),
        threshold_labels,
        grouped_labels: grouping.labels,
        cluster_ids: grouping.clusters,
    };
    log::info!(
        "stage=decomposition score_loss={:.5} threshold_dynamic={} grouped_dynamic={} clusters={}",
        field.final_loss,
        result.threshold_labels.iter().filter(|l| **l).count(),
        result.dynamic_count(),
        grouping.cluster_count
    );
    Ok((result, maps))
}
