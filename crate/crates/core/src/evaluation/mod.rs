//! Image metrics, decomposition IoU, trajectory rendering and the
//! Gaussian-occupancy collision cost used for planning.

mod metrics;
mod planning;

pub use metrics::{l1, psnr, ssim, ssim_with_grad, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use planning::{collision_cost, optimize_trajectory, second_difference_max, CollisionParams, PlanParams, PlanResult};

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::compose_scene_at_t;
use crate::pipeline::PixelSource;
use crate::raster::{render, GaussianSnapshot, RenderOptions};
use crate::scene::{CameraPose, Gaussian3D, HybridScene, PoseRecord, ReferenceBundle};
use crate::{Error, Real, Result};

/// Rendered alpha below this counts as empty when thresholding labels.
pub const LABEL_ALPHA_EPS: f64 = 1e-3;

/// `|A ∩ B| / |A ∪ B|`, with empty ∪ empty defined as 1.
pub fn mask_iou(a: &Array2<bool>, b: &Array2<bool>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("mask shapes differ"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b.iter()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Splats 0/1 labels with `snapshot`'s geometry and thresholds the
/// alpha-normalized result at 0.5.
pub fn label_mask<T: Real>(snapshot: GaussianSnapshot<T>, labels: &[bool], pose: &CameraPose<T>) -> Result<Array2<bool>> {
    let payload = labels.iter().map(|&l| if l { T::one() } else { T::zero() }).collect();
    let snap = snapshot.with_payload(payload)?;
    let out = render(&snap, pose, &RenderOptions::default().with_payload(true))?;
    let s = out.scalar.expect("payload requested");
    let eps = T::lit(LABEL_ALPHA_EPS);
    let half = T::lit(0.5);
    Ok(ndarray::Zip::from(&s).and(&out.alpha).map_collect(|&v, &a| a > eps && v / a > half))
}

/// Mean dynamic-class IoU over `frames`. `labeled(f)` supplies the geometry
/// for frame `f` and one label per entry.
pub fn decomposition_iou<T, F>(bundle: &ReferenceBundle<T>, frames: &[usize], labeled: F) -> Result<f64>
where
    T: Real,
    F: Fn(usize) -> Result<(GaussianSnapshot<T>, Vec<bool>)> + Sync,
{
    if !bundle.has_masks() {
        return Err(Error::invalid("bundle has no dynamic masks"));
    }
    if frames.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    let per: Vec<f64> = frames
        .par_iter()
        .map(|&f| {
            let frame = bundle.frames.get(f).ok_or_else(|| Error::invalid(format!("frame {f} out of range")))?;
            let (snap, labels) = labeled(f)?;
            let pred = label_mask(snap, &labels, &frame.pose)?;
            mask_iou(&pred, frame.dyn_mask.as_ref().expect("checked above"))
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// IoU of a hybrid scene: dynamic set labeled 1, static set 0, composed at
/// each frame's time.
pub fn scene_iou<T: Real>(scene: &HybridScene<T>, bundle: &ReferenceBundle<T>, frames: &[usize]) -> Result<f64> {
    let labels: Vec<bool> = std::iter::repeat_n(false, scene.static_gaussians.len())
        .chain(std::iter::repeat_n(true, scene.dynamic_gaussians.len()))
        .collect();
    decomposition_iou(bundle, frames, |f| Ok((compose_scene_at_t(scene, T::from_usize_lossy(f))?.0, labels.clone())))
}

/// IoU of per-Gaussian labels on time-independent geometry: frame `f` is
/// evaluated with the Gaussians lifted from frame `f` only.
pub fn source_iou<T: Real>(
    gaussians: &[Gaussian3D<T>],
    sources: &[PixelSource],
    labels: &[bool],
    sh_degree: usize,
    bundle: &ReferenceBundle<T>,
    frames: &[usize],
) -> Result<f64> {
    if gaussians.len() != sources.len() || gaussians.len() != labels.len() {
        return Err(Error::invalid("Gaussians, sources and labels must align"));
    }
    decomposition_iou(bundle, frames, |f| {
        let mut snap = GaussianSnapshot::empty(sh_degree);
        let mut l = Vec::new();
        for ((g, s), &lab) in gaussians.iter().zip(sources).zip(labels) {
            if s.frame == f {
                snap.push(g)?;
                l.push(lab);
            }
        }
        Ok((snap, l))
    })
}

/// One trajectory step: a camera and the (continuous) scene time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep<T> {
    pub pose: CameraPose<T>,
    pub t: T,
}

pub fn trajectory_from_records<T: Real>(records: &[PoseRecord]) -> Result<Vec<TrajectoryStep<T>>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(TrajectoryStep {
                pose: r.to_pose().map_err(|e| Error::invalid(format!("trajectory step {i}: {e}")))?,
                t: T::lit(r.t),
            })
        })
        .collect()
}

pub fn trajectory_to_records<T: Real>(steps: &[TrajectoryStep<T>]) -> Vec<PoseRecord> {
    steps.iter().map(|s| PoseRecord::from_pose(&s.pose, s.t)).collect()
}

/// Frame `i` is the scene composed at `tᵢ` rendered from pose `i`.
pub fn render_trajectory<T: Real>(scene: &HybridScene<T>, steps: &[TrajectoryStep<T>], background: [T; 3]) -> Result<Vec<Array3<T>>> {
    let opts = RenderOptions::default().with_background(background);
    steps
        .iter()
        .map(|s| {
            let (snap, extrapolated) = compose_scene_at_t(scene, s.t)?;
            if extrapolated {
                log::warn!("rendering at t = {} outside the reference time range", s.t);
            }
            Ok(render(&snap, &s.pose, &opts)?.color)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub decomposition_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_frame: Vec<FrameMetrics>,
    pub summary: MetricsSummary,
}

/// PSNR/SSIM of the scene against the listed reference frames, plus the
/// decomposition IoU over those frames when the bundle has masks.
pub fn evaluate_frames<T: Real>(scene: &HybridScene<T>, bundle: &ReferenceBundle<T>, frames: &[usize], background: [T; 3]) -> Result<MetricsReport> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    let mut per_frame = Vec::with_capacity(frames.len());
    for &f in frames {
        let frame = bundle.frames.get(f).ok_or_else(|| Error::invalid(format!("frame {f} out of range 0..{}", bundle.len())))?;
        let step = TrajectoryStep {
            pose: frame.pose.clone(),
            t: T::from_usize_lossy(f),
        };
        let img = render_trajectory(scene, &[step], background)?.remove(0);
        per_frame.push(FrameMetrics {
            frame: f,
            psnr: psnr(img.view(), frame.image.view())?,
            ssim: ssim(img.view(), frame.image.view())?.as_f64(),
        });
    }
    let n = per_frame.len() as f64;
    let summary = MetricsSummary {
        mean_psnr: per_frame.iter().map(|m| m.psnr).sum::<f64>() / n,
        mean_ssim: per_frame.iter().map(|m| m.ssim).sum::<f64>() / n,
        decomposition_iou: if bundle.has_masks() { Some(scene_iou(scene, bundle, frames)?) } else { None },
    };
    Ok(MetricsReport { per_frame, summary })
}
