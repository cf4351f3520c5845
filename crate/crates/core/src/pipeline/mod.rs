//! End-to-end scene generation: initialization from point maps, the static
//! pre-pass, decomposition, and joint optimization of the hybrid scene.

mod config;
mod init;
mod persist;
mod train;

pub use config::{ClusterParams, ErrorMapParams, LearningRates, LossWeights, PipelineConfig, PruneConfig, ScoreConfig};
pub(crate) use init::median_sorted;
pub use init::{init_gaussians_from_bundle, init_gaussians_from_frames, Initialization, PixelSource, INIT_OPACITY, MIN_INIT_POINTS};
pub use persist::{load_scene, save_scene, scene_from_bytes, scene_to_bytes, write_atomic, SCENE_MAGIC, SCENE_VERSION};
pub use train::{mean_psnr, photometric_loss, LossTerms, StageMetrics, Trainer};
pub(crate) use train::render_options;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose, optimize_static_prepass, DecompositionResult, ErrorMapSet};
use crate::dynamics::DeformationField;
use crate::scene::{Gaussian3D, HybridScene, ReferenceBundle};
use crate::{Error, Real, Result};

/// Reference frames not listed in `holdout`.
pub fn training_frames(num_frames: usize, holdout: &[usize]) -> Result<Vec<usize>> {
    if let Some(&h) = holdout.iter().find(|&&h| h >= num_frames) {
        return Err(Error::invalid(format!("holdout frame {h} out of range 0..{num_frames}")));
    }
    let frames: Vec<usize> = (0..num_frames).filter(|f| !holdout.contains(f)).collect();
    if frames.is_empty() {
        return Err(Error::invalid("every frame is held out"));
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub threshold_dynamic: usize,
    pub grouped_dynamic: usize,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub initial_gaussians: usize,
    pub scene_scale: f64,
    pub training_frames: Vec<usize>,
    pub stages: Vec<StageMetrics>,
    pub decomposition: Option<DecompositionSummary>,
}

/// Everything up to and including decomposition, index-aligned.
pub struct DecompositionRun<T> {
    pub init: Initialization<T>,
    /// Pre-pass output, same order as `init.gaussians`.
    pub fitted: Vec<Gaussian3D<T>>,
    /// `None` when the configuration asks for an all-deformable scene.
    pub result: Option<DecompositionResult>,
    pub error_maps: Option<ErrorMapSet<T>>,
    pub frames: Vec<usize>,
    pub stages: Vec<StageMetrics>,
}

pub fn run_decomposition<T: Real>(bundle: &ReferenceBundle<T>, config: &PipelineConfig) -> Result<DecompositionRun<T>> {
    config.validate()?;
    bundle.validate()?;
    let frames = training_frames(bundle.len(), &config.holdout_frames)?;
    let init_frames: Vec<usize> = frames.iter().copied().step_by(config.frame_stride).collect();
    let init = init_gaussians_from_frames(bundle, &init_frames, config.subsample_stride, config.sh_degree)?;
    log::info!(
        "stage=init gaussians={} scene_scale={:.4} frames={}",
        init.gaussians.len(),
        init.scene_scale,
        init_frames.len()
    );
    let (fitted, prepass) = optimize_static_prepass(init.gaussians.clone(), bundle, &frames, init.scene_scale, init.scene_center, config)?;
    let (result, error_maps) = if config.all_deformable {
        (None, None)
    } else {
        let (r, m) = decompose(&fitted, bundle, &frames, init.scene_scale, init.scene_center, config)?;
        (Some(r), Some(m))
    };
    Ok(DecompositionRun {
        init,
        fitted,
        result,
        error_maps,
        frames,
        stages: vec![prepass],
    })
}

/// Splits the fitted Gaussians by label and attaches a fresh deformation
/// field when any Gaussian is dynamic.
pub fn assemble_hybrid<T: Real>(
    fitted: &[Gaussian3D<T>],
    labels: &[bool],
    scores: Option<&[f64]>,
    num_frames: usize,
    scene_scale: T,
    scene_center: [T; 3],
    config: &PipelineConfig,
) -> Result<HybridScene<T>> {
    if labels.len() != fitted.len() {
        return Err(Error::invalid("one label per Gaussian required"));
    }
    let mut scene = HybridScene::static_only(Vec::new(), num_frames, scene_scale, scene_center, config.sh_degree);
    scene.feature_dim = fitted.first().map_or(0, |g| g.feature.len());
    for (i, (g, &dynamic)) in fitted.iter().zip(labels).enumerate() {
        let mut g = g.clone();
        g.dynamic_score = scores.map_or(T::from_usize_lossy(usize::from(dynamic)), |s| T::lit(s[i]));
        if dynamic {
            scene.dynamic_gaussians.push(g);
        } else {
            scene.static_gaussians.push(g);
        }
    }
    if !scene.dynamic_gaussians.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        scene.deformation = Some(DeformationField::new(&config.deform, scene_center, scene_scale, num_frames, &mut rng)?);
    }
    Ok(scene)
}

/// Init → static pre-pass → error maps → scores → split → grouping →
/// hybrid optimization.
pub fn generate_scene<T: Real>(bundle: &ReferenceBundle<T>, config: &PipelineConfig) -> Result<(HybridScene<T>, GenerateReport)> {
    let run = run_decomposition(bundle, config)?;
    let (labels, scores, summary) = match &run.result {
        Some(r) => (
            r.grouped_labels.clone(),
            Some(r.scores.as_slice()),
            Some(DecompositionSummary {
                threshold_dynamic: r.threshold_labels.iter().filter(|l| **l).count(),
                grouped_dynamic: r.dynamic_count(),
                mean_score: r.scores.iter().sum::<f64>() / r.scores.len().max(1) as f64,
            }),
        ),
        None => (vec![true; run.fitted.len()], None, None),
    };
    let scene = assemble_hybrid(&run.fitted, &labels, scores, bundle.len(), run.init.scene_scale, run.init.scene_center, config)?;
    let mut trainer = Trainer::new(bundle, run.frames.clone(), scene, config, true)?;
    let hybrid = trainer.run_stage("hybrid", config.hybrid_iters, config.background)?;
    let mut stages = run.stages;
    stages.push(hybrid);
    let report = GenerateReport {
        initial_gaussians: run.init.gaussians.len(),
        scene_scale: run.init.scene_scale.as_f64(),
        training_frames: run.frames,
        stages,
        decomposition: summary,
    };
    Ok((trainer.scene, report))
}
