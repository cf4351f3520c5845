use ndarray::{Array2, ArrayView2};

use crate::Real;

/// Output width of [`positional_encoding`] for a `dim`-vector.
pub fn encoded_dim(dim: usize, num_freqs: usize) -> usize {
    dim * (2 * num_freqs + 1)
}

/// `[x, sin(2⁰πx), cos(2⁰πx), …, sin(2^{L-1}πx), cos(2^{L-1}πx)]`, each block `dim` wide.
pub fn positional_encoding<T: Real>(x: &[T], num_freqs: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(encoded_dim(x.len(), num_freqs));
    out.extend_from_slice(x);
    let mut freq = T::PI();
    for _ in 0..num_freqs {
        out.extend(x.iter().map(|&v| (freq * v).sin()));
        out.extend(x.iter().map(|&v| (freq * v).cos()));
        freq = freq * T::lit(2.0);
    }
    out
}

/// Row-wise encoding of an `N × dim` batch.
pub fn encode_batch<T: Real>(x: ArrayView2<T>, num_freqs: usize) -> Array2<T> {
    let (n, d) = x.dim();
    let width = encoded_dim(d, num_freqs);
    let mut out = Array2::zeros((n, width));
    for (row, mut o) in x.outer_iter().zip(out.outer_iter_mut()) {
        let row: Vec<T> = row.to_vec();
        for (dst, v) in o.iter_mut().zip(positional_encoding(&row, num_freqs)) {
            *dst = v;
        }
    }
    out
}

/// Pulls a gradient w.r.t. the encoding back to the raw inputs.
pub fn encode_batch_backward<T: Real>(x: ArrayView2<T>, num_freqs: usize, grad: ArrayView2<T>) -> Array2<T> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        for k in 0..d {
            let xv = x[[i, k]];
            let mut acc = grad[[i, k]];
            let mut freq = T::PI();
            for l in 0..num_freqs {
                let base = d + 2 * l * d;
                acc += grad[[i, base + k]] * freq * (freq * xv).cos();
                acc -= grad[[i, base + d + k]] * freq * (freq * xv).sin();
                freq = freq * T::lit(2.0);
            }
            out[[i, k]] = acc;
        }
    }
    out
}
