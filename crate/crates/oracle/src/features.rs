//! Per-pixel feature maps: `[R, G, B, |∇L|, u, v, id hash…]`.

use ndarray::{Array2, Array3};

use crate::spec::BASE_FEATURES;

/// Deterministic value in `[0, 1)` for primitive `id`, channel `k`.
pub fn id_hash(id: u32, k: usize) -> f64 {
    let mut z = ((id as u64) << 32 | k as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Luminance gradient magnitude with central differences (one-sided at borders).
pub fn gradient_magnitude(image: &Array3<f64>) -> Array2<f64> {
    let (h, w, _) = image.dim();
    let lum = Array2::from_shape_fn((h, w), |(i, j)| (image[[i, j, 0]] + image[[i, j, 1]] + image[[i, j, 2]]) / 3.0);
    Array2::from_shape_fn((h, w), |(i, j)| {
        let d = |a: f64, b: f64, span: usize| if span == 0 { 0.0 } else { (a - b) / span as f64 };
        let (jl, jr) = (j.saturating_sub(1), (j + 1).min(w - 1));
        let (iu, id) = (i.saturating_sub(1), (i + 1).min(h - 1));
        let gx = d(lum[[i, jr]], lum[[i, jl]], jr - jl);
        let gy = d(lum[[id, j]], lum[[iu, j]], id - iu);
        (gx * gx + gy * gy).sqrt()
    })
}

/// Builds an `H × W × dim` feature map. `ids` is `None` for the RGB-only
/// fallback, in which case the hash channels are zero.
pub fn feature_map(image: &Array3<f64>, ids: Option<&Array2<u32>>, dim: usize) -> Array3<f64> {
    assert!(dim >= BASE_FEATURES, "feature dimension below the fixed channels");
    let (h, w, _) = image.dim();
    let grad = gradient_magnitude(image);
    let mut f = Array3::zeros((h, w, dim));
    for i in 0..h {
        for j in 0..w {
            for c in 0..3 {
                f[[i, j, c]] = image[[i, j, c]];
            }
            f[[i, j, 3]] = grad[[i, j]];
            f[[i, j, 4]] = (j as f64 + 0.5) / w as f64;
            f[[i, j, 5]] = (i as f64 + 0.5) / h as f64;
            if let Some(ids) = ids {
                let id = ids[[i, j]];
                if id != 0 {
                    for k in BASE_FEATURES..dim {
                        f[[i, j, k]] = id_hash(id, k - BASE_FEATURES);
                    }
                }
            }
        }
    }
    f
}
