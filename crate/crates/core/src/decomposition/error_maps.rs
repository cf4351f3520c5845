use ndarray::{Array2, Array3, Axis};

use crate::pipeline::ErrorMapParams;
use crate::{Error, Real, Result};

/// Per-frame photometric residuals of a static fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMapSet<T> {
    /// `|render − reference|` per channel.
    pub raw: Vec<Array3<T>>,
    /// Channel mean, 3×3 box blur, percentile rescale, clamped to `[0, 1]`.
    pub normalized: Vec<Array2<T>>,
}

impl<T: Real> ErrorMapSet<T> {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

pub fn compute_error_maps<T: Real>(renders: &[Array3<T>], references: &[Array3<T>], params: &ErrorMapParams) -> Result<ErrorMapSet<T>> {
    if renders.len() != references.len() {
        return Err(Error::invalid(format!("{} renders but {} references", renders.len(), references.len())));
    }
    let mut set = ErrorMapSet {
        raw: Vec::with_capacity(renders.len()),
        normalized: Vec::with_capacity(renders.len()),
    };
    for (i, (r, q)) in renders.iter().zip(references).enumerate() {
        if r.shape() != q.shape() || r.shape()[2] == 0 {
            return Err(Error::invalid(format!("frame {i}: render shape {:?} vs reference {:?}", r.shape(), q.shape())));
        }
        let raw = ndarray::Zip::from(r).and(q).map_collect(|&a, &b| (a - b).abs());
        let gray = raw.mean_axis(Axis(2)).expect("non-empty channel axis");
        set.normalized.push(normalize(&box_blur3(&gray), params));
        set.raw.push(raw);
    }
    Ok(set)
}

fn box_blur3<T: Real>(x: &Array2<T>) -> Array2<T> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut s = T::zero();
        let mut n = 0usize;
        for y in i.saturating_sub(1)..(i + 2).min(h) {
            for c in j.saturating_sub(1)..(j + 2).min(w) {
                s += x[[y, c]];
                n += 1;
            }
        }
        s / T::from_usize_lossy(n)
    })
}

fn normalize<T: Real>(x: &Array2<T>, params: &ErrorMapParams) -> Array2<T> {
    let mut v: Vec<f64> = x.iter().map(|e| e.as_f64()).collect();
    v.sort_by(f64::total_cmp);
    let max = v.last().copied().unwrap_or(0.0);
    let rank = ((params.percentile * v.len() as f64).ceil() as usize).clamp(1, v.len().max(1)) - 1;
    let q = v.get(rank).copied().unwrap_or(0.0);
    let mut denom = q.max(params.floor);
    if denom <= 0.0 {
        denom = max;
    }
    if denom <= 0.0 {
        return Array2::zeros(x.dim());
    }
    let inv = T::lit(1.0 / denom);
    x.mapv(|e| (e * inv).min(T::one()).max(T::zero()))
}
