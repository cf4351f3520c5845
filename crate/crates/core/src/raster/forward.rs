use rayon::prelude::*;

use super::preprocess::{prepare, splat_alpha, Prepared};
use super::{GaussianSnapshot, RenderOptions, RenderOutput, TILE_SIZE};
use crate::scene::CameraPose;
use crate::{Error, Real, Result};

/// Per-pixel accumulation for one tile, row-major within the tile.
struct TileResult<T> {
    color: Vec<[T; 3]>,
    alpha: Vec<T>,
    depth: Vec<T>,
    scalar: Vec<T>,
    count: Vec<u32>,
}

pub(crate) fn tile_bounds(tile: usize, tiles_x: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
    let tx = tile % tiles_x;
    let ty = tile / tiles_x;
    let x0 = tx * TILE_SIZE;
    let y0 = ty * TILE_SIZE;
    (x0, (x0 + TILE_SIZE).min(width), y0, (y0 + TILE_SIZE).min(height))
}

/// Splats `snapshot` into `pose`'s image.
pub fn render<T: Real>(
    snapshot: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
) -> Result<RenderOutput<T>> {
    snapshot.validate()?;
    if opts.payload && snapshot.payload.is_none() {
        return Err(Error::invalid("payload rendering requested but snapshot has no payload"));
    }
    let prep = prepare(snapshot, pose, opts);
    let (w, h) = (pose.width, pose.height);
    let results: Vec<TileResult<T>> = (0..prep.tiles.len())
        .into_par_iter()
        .map(|t| render_tile(&prep, t, w, h, opts))
        .collect();

    let mut out = RenderOutput::blank(h, w, opts.background, opts.payload);
    out.stats = prep.stats;
    for (t, res) in results.into_iter().enumerate() {
        let (x0, x1, y0, y1) = tile_bounds(t, prep.tiles_x, w, h);
        let mut k = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                for ch in 0..3 {
                    out.color[[y, x, ch]] = res.color[k][ch];
                }
                out.alpha[[y, x]] = res.alpha[k];
                out.depth[[y, x]] = res.depth[k];
                if let Some(s) = out.scalar.as_mut() {
                    s[[y, x]] = res.scalar[k];
                }
                out.contrib_count[[y, x]] = res.count[k];
                k += 1;
            }
        }
    }
    Ok(out)
}

fn render_tile<T: Real>(prep: &Prepared<T>, tile: usize, w: usize, h: usize, opts: &RenderOptions<T>) -> TileResult<T> {
    let (x0, x1, y0, y1) = tile_bounds(tile, prep.tiles_x, w, h);
    let n = (x1 - x0) * (y1 - y0);
    let mut res = TileResult {
        color: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
        scalar: Vec::with_capacity(n),
        count: Vec::with_capacity(n),
    };
    let list = &prep.tiles[tile];
    let half = T::lit(0.5);
    for y in y0..y1 {
        let py = T::from_usize_lossy(y) + half;
        for x in x0..x1 {
            let px = T::from_usize_lossy(x) + half;
            let mut trans = T::one();
            let mut c = [T::zero(); 3];
            let (mut a, mut d, mut s) = (T::zero(), T::zero(), T::zero());
            let mut count = 0u32;
            for &k in list {
                let sp = &prep.splats[k as usize];
                let Some((alpha, _, _, _)) = splat_alpha(sp, px, py, opts) else {
                    continue;
                };
                let wgt = alpha * trans;
                c[0] += sp.color[0] * wgt;
                c[1] += sp.color[1] * wgt;
                c[2] += sp.color[2] * wgt;
                a += wgt;
                d += sp.depth * wgt;
                s += sp.payload * wgt;
                trans *= T::one() - alpha;
                count += 1;
                if trans < opts.transmittance_min {
                    break;
                }
            }
            if count > 0 {
                for ch in 0..3 {
                    c[ch] += opts.background[ch] * trans;
                }
            } else {
                c = opts.background;
            }
            res.color.push(c);
            res.alpha.push(a.min(T::one()));
            res.depth.push(d);
            res.scalar.push(s);
            res.count.push(count);
        }
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::brute_force_render;
    use crate::scene::{linalg::identity3, rgb_to_dc, Gaussian3D};
    use crate::logit;
    use approx::assert_abs_diff_eq;

    pub(crate) fn camera(w: usize, h: usize) -> CameraPose<f64> {
        CameraPose {
            fx: 60.0,
            fy: 60.0,
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
            width: w,
            height: h,
            rotation: identity3(),
            translation: [0.0; 3],
            timestamp: 0,
        }
    }

    fn gauss(pos: [f64; 3], scale: f64, opacity: f64, rgb: [f64; 3]) -> Gaussian3D<f64> {
        Gaussian3D {
            position: pos,
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [scale.ln(); 3],
            opacity_logit: logit(opacity),
            sh: vec![rgb_to_dc(rgb)],
            feature: vec![],
            dynamic_score: 0.0,
        }
    }

    #[test]
    fn empty_scene_is_background() {
        let snap = GaussianSnapshot::<f64>::empty(0);
        let out = render(&snap, &camera(32, 32), &RenderOptions::default()).unwrap();
        assert!(out.color.iter().all(|&v| v == 0.0));
        assert!(out.alpha.iter().all(|&v| v == 0.0));
        let bg = RenderOptions::default().with_background([0.2, 0.3, 0.4]);
        let out = render(&snap, &camera(8, 8), &bg).unwrap();
        assert_eq!(out.color[[3, 5, 2]], 0.4);
    }

    #[test]
    fn single_centered_splat_peaks_at_principal_point() {
        let cam = camera(33, 33);
        let opacity = 1.0 - 1e-9;
        let g = gauss([0.0, 0.0, 3.0], 0.1, opacity, [0.9, 0.4, 0.1]);
        let snap = GaussianSnapshot::from_gaussians(&[g], 0).unwrap();
        let out = render(&snap, &cam, &RenderOptions::default()).unwrap();
        // Pixel 16 has its center at 16.5 = cx.
        let a = out.alpha[[16, 16]];
        assert_abs_diff_eq!(a, opacity, epsilon = 1e-12);
        assert_abs_diff_eq!(out.color[[16, 16, 0]], 0.9 * opacity, epsilon = 1e-9);
        assert_abs_diff_eq!(out.color[[16, 16, 1]], 0.4 * opacity, epsilon = 1e-9);
        assert!(out.alpha.iter().all(|&v| v <= a));
        assert_eq!(out.depth[[16, 16]], 3.0 * a);
    }

    #[test]
    fn two_layer_compositing_by_hand() {
        let cam = camera(33, 33);
        let (a1, a2) = (0.6, 0.7);
        let (c1, c2) = ([1.0, 0.2, 0.0], [0.0, 0.5, 1.0]);
        let gs = vec![gauss([0.0, 0.0, 2.0], 0.2, a2, c2), gauss([0.0, 0.0, 1.0], 0.1, a1, c1)];
        // Listed back-to-front on purpose: the renderer must sort by depth.
        let gs = vec![gs[0].clone(), gs[1].clone()];
        let out = render(&GaussianSnapshot::from_gaussians(&gs, 0).unwrap(), &cam, &RenderOptions::default()).unwrap();
        for ch in 0..3 {
            let want = c1[ch] * a1 + c2[ch] * a2 * (1.0 - a1);
            assert_abs_diff_eq!(out.color[[16, 16, ch]], want, epsilon = 1e-12);
        }
        assert_eq!(out.contrib_count[[16, 16]], 2);
    }

    #[test]
    fn payload_of_ones_equals_alpha() {
        let cam = camera(40, 40);
        let gs: Vec<_> = (0..30)
            .map(|i| {
                let f = i as f64;
                gauss([(f * 0.37).sin() * 0.5, (f * 0.91).cos() * 0.5, 2.0 + 0.1 * f], 0.08, 0.3 + 0.02 * f, [0.5; 3])
            })
            .collect();
        let snap = GaussianSnapshot::from_gaussians(&gs, 0).unwrap().with_payload(vec![1.0; 30]).unwrap();
        let out = render(&snap, &cam, &RenderOptions::default().with_payload(true)).unwrap();
        assert_eq!(out.scalar.as_ref().unwrap(), &out.alpha);
    }

    #[test]
    fn single_gaussian_bitwise_equal_to_reference() {
        let cam = camera(48, 40);
        let g = gauss([0.1, -0.05, 2.5], 0.15, 0.8, [0.3, 0.6, 0.2]);
        let snap = GaussianSnapshot::from_gaussians(&[g], 0).unwrap();
        let o = RenderOptions::default();
        assert_eq!(render(&snap, &cam, &o).unwrap(), brute_force_render(&snap, &cam, &o).unwrap());
    }

    #[test]
    fn behind_camera_is_culled_and_counted() {
        let snap = GaussianSnapshot::from_gaussians(&[gauss([0.0, 0.0, -2.0], 0.1, 0.5, [1.0; 3])], 0).unwrap();
        let out = render(&snap, &camera(16, 16), &RenderOptions::default()).unwrap();
        assert_eq!(out.stats.culled, 1);
        assert!(out.alpha.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn payload_without_values_is_an_error() {
        let snap = GaussianSnapshot::<f64>::empty(0);
        assert!(render(&snap, &camera(8, 8), &RenderOptions::default().with_payload(true)).is_err());
    }
}
