//! Per-Gaussian projection, depth ordering and tile binning.

use rayon::prelude::*;

use super::{GaussianSnapshot, RenderOptions, RenderStats, TILE_SIZE};
use crate::scene::linalg::{mat3_mul, normalize3, sub3, sym3_unpack, transpose3};
use crate::scene::{ewa_2d, eval_sh_unchecked, CameraPose, FAR_PLANE, NEAR_PLANE};
use crate::Real;

/// Screen-space splat, everything the pixel loop needs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Splat<T> {
    pub index: usize,
    pub mean: [T; 2],
    /// Inverse screen covariance `(a, b, c)`: `m = a dx² + 2b dx dy + c dy²`.
    pub conic: [T; 3],
    pub opacity: T,
    pub color: [T; 3],
    pub payload: T,
    pub depth: T,
    /// Inclusive pixel bounds `[x0, x1] × [y0, y1]`; empty when `x0 > x1`.
    pub rect: [i64; 4],
}

pub(crate) struct Prepared<T> {
    /// Visible splats in compositing order.
    pub splats: Vec<Splat<T>>,
    /// For every tile (row-major), positions into `splats`.
    pub tiles: Vec<Vec<u32>>,
    pub tiles_x: usize,
    pub stats: RenderStats,
}

pub(crate) fn project_one<T: Real>(
    snap: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
    i: usize,
) -> Result<Splat<T>, bool> {
    let x = snap.positions[i];
    let p = pose.to_camera(x);
    let z = p[2];
    if !(z > T::lit(NEAR_PLANE)) || z > T::lit(FAR_PLANE) {
        return Err(false);
    }
    let j = pose.projection_jacobian(p);
    let cov = sym3_unpack(&snap.covariances[i]);
    let sc = mat3_mul(&mat3_mul(&pose.rotation, &cov), &transpose3(&pose.rotation));
    let c2 = ewa_2d(&j, &sc, opts.blur);
    let (a, b, c) = (c2[0][0], c2[0][1], c2[1][1]);
    let det = a * c - b * b;
    if !(det > T::lit(1e-12)) {
        return Err(true);
    }
    let inv = T::one() / det;
    let mean = [pose.fx * p[0] / z + pose.cx, pose.fy * p[1] / z + pose.cy];
    let rx = opts.sigma_cutoff * a.sqrt();
    let ry = opts.sigma_cutoff * c.sqrt();
    let half = T::lit(0.5);
    let lo_x = (mean[0] - rx - half).ceil().to_i64().unwrap_or(i64::MAX).max(0);
    let hi_x = (mean[0] + rx - half)
        .floor()
        .to_i64()
        .unwrap_or(i64::MIN)
        .min(pose.width as i64 - 1);
    let lo_y = (mean[1] - ry - half).ceil().to_i64().unwrap_or(i64::MAX).max(0);
    let hi_y = (mean[1] + ry - half)
        .floor()
        .to_i64()
        .unwrap_or(i64::MIN)
        .min(pose.height as i64 - 1);
    let dir = normalize3(sub3(x, pose.center()));
    let color = eval_sh_unchecked(snap.sh_of(i), dir, snap.sh_degree);
    Ok(Splat {
        index: i,
        mean,
        conic: [c * inv, -b * inv, a * inv],
        opacity: snap.opacities[i],
        color,
        payload: snap.payload.as_ref().map_or(T::zero(), |p| p[i]),
        depth: z,
        rect: [lo_x, hi_x, lo_y, hi_y],
    })
}

pub(crate) fn prepare<T: Real>(
    snap: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
) -> Prepared<T> {
    let projected: Vec<Result<Splat<T>, bool>> = (0..snap.len())
        .into_par_iter()
        .map(|i| project_one(snap, pose, opts, i))
        .collect();
    let mut stats = RenderStats::default();
    let mut splats = Vec::with_capacity(projected.len());
    for r in projected {
        match r {
            Ok(s) => splats.push(s),
            Err(true) => stats.degenerate += 1,
            Err(false) => stats.culled += 1,
        }
    }
    splats.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));
    stats.visible = splats.len();

    let tiles_x = pose.width.div_ceil(TILE_SIZE);
    let tiles_y = pose.height.div_ceil(TILE_SIZE);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    let ts = TILE_SIZE as i64;
    for (k, s) in splats.iter().enumerate() {
        let [x0, x1, y0, y1] = s.rect;
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for ty in (y0 / ts)..=(y1 / ts) {
            for tx in (x0 / ts)..=(x1 / ts) {
                tiles[ty as usize * tiles_x + tx as usize].push(k as u32);
            }
        }
    }
    Prepared {
        splats,
        tiles,
        tiles_x,
        stats,
    }
}

/// Attenuated opacity of `s` at pixel center `(px, py)`, or `None` when the
/// pixel is outside the footprint or below the contribution floor.
/// Returns `(α', exp(-m/2), dx, dy)`.
#[inline(always)]
pub(crate) fn splat_alpha<T: Real>(s: &Splat<T>, px: T, py: T, opts: &RenderOptions<T>) -> Option<(T, T, T, T)> {
    let dx = px - s.mean[0];
    let dy = py - s.mean[1];
    let m = s.conic[0] * dx * dx + T::lit(2.0) * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
    if !(m <= opts.sigma_cutoff * opts.sigma_cutoff) {
        return None;
    }
    let g = (T::lit(-0.5) * m).exp();
    let alpha = s.opacity * g;
    if alpha < opts.alpha_min {
        return None;
    }
    Some((alpha, g, dx, dy))
}
