use rayon::prelude::*;

use super::forward::tile_bounds;
use super::preprocess::{prepare, splat_alpha};
use super::{GaussianSnapshot, RenderOptions};
use crate::scene::CameraPose;
use crate::{Real, Result};

/// Compositing weights `wᵢ(p) = αᵢ' Tᵢ` of a fixed geometry, stored sparsely
/// per pixel. Any payload splat over that geometry is then `Σ sᵢ wᵢ(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatWeights<T> {
    /// `(row, col)` of each stored pixel.
    pub pixels: Vec<(usize, usize)>,
    /// Pixel `k` owns `entries[offsets[k]..offsets[k + 1]]`.
    pub offsets: Vec<usize>,
    /// `(snapshot index, weight)`.
    pub entries: Vec<(u32, T)>,
}

impl<T: Real> SplatWeights<T> {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixel(&self, k: usize) -> &[(u32, T)] {
        &self.entries[self.offsets[k]..self.offsets[k + 1]]
    }

    /// `Σ wᵢ(p)`, equal to the rendered alpha.
    pub fn alpha(&self, k: usize) -> T {
        self.pixel(k).iter().map(|e| e.1).sum()
    }

    pub fn splat(&self, k: usize, payload: &[T]) -> T {
        self.pixel(k).iter().map(|&(i, w)| payload[i as usize] * w).sum()
    }
}

/// Records the weights of every `stride`-th pixel in both directions.
pub fn splat_weights<T: Real>(
    snapshot: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
    stride: usize,
) -> Result<SplatWeights<T>> {
    snapshot.validate()?;
    let stride = stride.max(1);
    let prep = prepare(snapshot, pose, opts);
    let (w, h) = (pose.width, pose.height);
    let half = T::lit(0.5);
    let per_tile: Vec<Vec<((usize, usize), Vec<(u32, T)>)>> = (0..prep.tiles.len())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = tile_bounds(t, prep.tiles_x, w, h);
            let mut out = Vec::new();
            for y in (y0..y1).filter(|y| y % stride == 0) {
                let py = T::from_usize_lossy(y) + half;
                for x in (x0..x1).filter(|x| x % stride == 0) {
                    let px = T::from_usize_lossy(x) + half;
                    let mut trans = T::one();
                    let mut list = Vec::new();
                    for &k in &prep.tiles[t] {
                        let sp = &prep.splats[k as usize];
                        let Some((alpha, ..)) = splat_alpha(sp, px, py, opts) else {
                            continue;
                        };
                        list.push((sp.index as u32, alpha * trans));
                        trans *= T::one() - alpha;
                        if trans < opts.transmittance_min {
                            break;
                        }
                    }
                    out.push(((y, x), list));
                }
            }
            out
        })
        .collect();
    let mut pixels: Vec<((usize, usize), Vec<(u32, T)>)> = per_tile.into_iter().flatten().collect();
    pixels.sort_by_key(|p| p.0);
    let mut sw = SplatWeights {
        pixels: Vec::with_capacity(pixels.len()),
        offsets: vec![0],
        entries: Vec::new(),
    };
    for (p, list) in pixels {
        sw.pixels.push(p);
        sw.entries.extend(list);
        sw.offsets.push(sw.entries.len());
    }
    Ok(sw)
}
