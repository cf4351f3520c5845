//! Analytic ground-truth 4D scenes and reference bundle I/O.
//!
//! Oracle scenes are built from planes, boxes and moving spheres/boxes and
//! rendered by exact ray/primitive intersection, so they share no code with
//! the splatting renderer they are used to test.

pub mod features;
pub mod io;
pub mod pfm;
pub mod presets;
pub mod render;
pub mod spec;
pub mod trace;

use hybrid_splat::scene::{CameraPose, Frame, ReferenceBundle};
use hybrid_splat::{Bundle, Result};
use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use io::{ingest_bundle, write_bundle, BundleMeta};
pub use spec::{DynamicPrimitive, Jitter, Motion, OracleSceneSpec, Shape, StaticPrimitive, Trajectory};
pub use trace::Albedo;

/// Rounds to the nearest 8-bit level, the precision of bundle images.
fn quantize_image(v: f64) -> f64 {
    io::to_u8(v) as f64 / 255.0
}

/// Renders every reference frame. Images are quantized to 8 bits and point
/// and feature maps to `f32`, so the result survives a write/ingest cycle
/// unchanged. Frame `i` draws its jitter from stream `i` of a ChaCha8
/// generator seeded with `seed`.
pub fn generate_bundle(spec: &OracleSceneSpec, seed: u64) -> Result<Bundle> {
    spec.validate()?;
    let frames = (0..spec.frames)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let traced = render::trace_reference(spec, i, &mut rng)?;
            let pose = spec.camera_at(i as f64)?;
            let image = traced.image.mapv(quantize_image);
            let featmap = features::feature_map(&image, Some(&traced.ids), spec.feature_dim).mapv(|v| v as f32 as f64);
            let pointmap = traced.pointmap.mapv(|v| v as f32 as f64);
            Ok(Frame {
                image,
                pose,
                pointmap,
                valid: traced.valid,
                featmap,
                dyn_mask: Some(traced.dyn_mask),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut bundle = ReferenceBundle::new(frames, spec.feature_dim)?;
    bundle.scene_scale_hint = scale_hint(&bundle);
    Ok(bundle)
}

/// Median distance from frame 0's camera to its visible surface points.
fn scale_hint(bundle: &Bundle) -> Option<f64> {
    let f = bundle.frames.first()?;
    let c = f.pose.center();
    let mut d: Vec<f64> = f
        .valid
        .indexed_iter()
        .filter(|(_, &ok)| ok)
        .filter_map(|((r, col), _)| f.point(r, col))
        .map(|p| trace::dot(trace::sub(p, c), trace::sub(p, c)).sqrt())
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

/// Noise-free image of the scene at time `t` seen from `pose`.
pub fn render_ground_truth(spec: &OracleSceneSpec, pose: &CameraPose<f64>, t: f64) -> Result<Array3<f64>> {
    Ok(render::trace_clean(spec, pose, t)?.image)
}

/// Noise-free dynamic mask of the scene at time `t` seen from `pose`.
pub fn ground_truth_mask(spec: &OracleSceneSpec, pose: &CameraPose<f64>, t: f64) -> Result<ndarray::Array2<bool>> {
    Ok(render::trace_clean(spec, pose, t)?.dyn_mask)
}
