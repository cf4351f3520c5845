use crate::spatial::PointIndex;

use crate::scene::{coeff_count, rgb_to_dc, Gaussian3D, ReferenceBundle, MIN_SCALE};
use crate::{logit, Error, Real, Result};

/// Fewer valid sampled points than this cannot seed a scene.
pub const MIN_INIT_POINTS: usize = 100;
pub const INIT_OPACITY: f64 = 0.1;

/// Pixel a Gaussian was lifted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelSource {
    pub frame: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct Initialization<T> {
    pub gaussians: Vec<Gaussian3D<T>>,
    pub sources: Vec<PixelSource>,
    pub scene_scale: T,
    pub scene_center: [T; 3],
}

/// One Gaussian per valid pixel on a `stride` grid of every frame. Position from the point map, degree-0 color from the pixel, scale
/// from the mean distance to the three nearest other points.
pub fn init_gaussians_from_bundle<T: Real>(bundle: &ReferenceBundle<T>, stride: usize, sh_degree: usize) -> Result<Initialization<T>> {
    let frames: Vec<usize> = (0..bundle.len()).collect();
    init_gaussians_from_frames(bundle, &frames, stride, sh_degree)
}

/// As [`init_gaussians_from_bundle`], restricted to the listed frames.
pub fn init_gaussians_from_frames<T: Real>(
    bundle: &ReferenceBundle<T>,
    frames: &[usize],
    stride: usize,
    sh_degree: usize,
) -> Result<Initialization<T>> {
    if stride == 0 {
        return Err(Error::invalid("subsampling stride must be ≥ 1"));
    }
    if sh_degree > 3 {
        return Err(Error::invalid("SH degree above 3"));
    }
    let mut sources = Vec::new();
    let mut points: Vec<[f64; 3]> = Vec::new();
    for &f in frames {
        let frame = bundle.frames.get(f).ok_or_else(|| Error::invalid(format!("frame {f} out of range")))?;
        for row in (0..frame.height()).step_by(stride) {
            for col in (0..frame.width()).step_by(stride) {
                if let Some(p) = frame.point(row, col) {
                    sources.push(PixelSource { frame: f, row, col });
                    points.push(p.map(|v| v.as_f64()));
                }
            }
        }
    }
    if points.len() < MIN_INIT_POINTS {
        return Err(Error::InsufficientGeometry {
            valid: points.len(),
            required: MIN_INIT_POINTS,
        });
    }

    let n = points.len() as f64;
    let mut center = [0.0; 3];
    for p in &points {
        for k in 0..3 {
            center[k] += p[k] / n;
        }
    }
    let mut dists: Vec<f64> = points
        .iter()
        .map(|p| ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2)).sqrt())
        .collect();
    dists.sort_by(f64::total_cmp);
    let scene_scale = median_sorted(&dists).max(MIN_SCALE);

    let index = PointIndex::new(&points);
    let nn_mean: Vec<f64> = points
        .iter()
        .map(|p| {
            // Four results: the point itself plus three neighbors.
            let d = index.nearest_distances(p, 4);
            let others = &d[1.min(d.len())..];
            if others.is_empty() {
                0.0
            } else {
                others.iter().sum::<f64>() / others.len() as f64
            }
        })
        .collect();
    // Coincident points would otherwise get a vanishing footprint.
    let floor = 1e-3 * scene_scale;

    let n_sh = coeff_count(sh_degree);
    let op = logit(T::lit(INIT_OPACITY));
    let gaussians = sources
        .iter()
        .zip(&points)
        .zip(&nn_mean)
        .map(|((src, p), &d)| {
            let frame = &bundle.frames[src.frame];
            let rgb = [0, 1, 2].map(|c| frame.image[[src.row, src.col, c]]);
            let mut sh = vec![[T::zero(); 3]; n_sh];
            sh[0] = rgb_to_dc(rgb);
            let s = T::lit(d.max(floor).ln());
            Gaussian3D {
                position: p.map(T::lit),
                rotation: [T::one(), T::zero(), T::zero(), T::zero()],
                log_scale: [s; 3],
                opacity_logit: op,
                sh,
                feature: (0..bundle.feature_dim).map(|k| frame.featmap[[src.row, src.col, k]]).collect(),
                dynamic_score: T::zero(),
            }
        })
        .collect();
    Ok(Initialization {
        gaussians,
        sources,
        scene_scale: T::lit(scene_scale),
        scene_center: center.map(T::lit),
    })
}

pub(crate) fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}
