//! PNG encoding and score overlays.

use std::io::Cursor;

use anyhow::Result;
use image::{ImageFormat, RgbImage};
use ndarray::{Array2, Array3};

/// Overlay strength at full coverage.
const OVERLAY_WEIGHT: f64 = 0.6;

pub fn png(image: &Array3<f64>) -> Result<Vec<u8>> {
    let (h, w, _) = image.dim();
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (r, c) = (y as usize, x as usize);
        image::Rgb([q(image[[r, c, 0]]), q(image[[r, c, 1]]), q(image[[r, c, 2]])])
    });
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Blue (0) through green (0.5) to red (1).
pub fn heat(s: f64) -> [f64; 3] {
    let s = s.clamp(0.0, 1.0);
    [s, 1.0 - (2.0 * s - 1.0).abs(), 1.0 - s]
}

/// Blends `color(i, j)` over `base` with weight `OVERLAY_WEIGHT · coverage`.
pub fn overlay(base: &Array3<f64>, coverage: &Array2<f64>, color: impl Fn(usize, usize) -> [f64; 3]) -> Array3<f64> {
    let mut out = base.clone();
    for ((i, j), &a) in coverage.indexed_iter() {
        let k = OVERLAY_WEIGHT * a.clamp(0.0, 1.0);
        let c = color(i, j);
        for ch in 0..3 {
            out[[i, j, ch]] = (1.0 - k) * base[[i, j, ch]] + k * c[ch];
        }
    }
    out
}
