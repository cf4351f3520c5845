use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};

use crate::{Error, Real, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_same(a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("image shapes differ: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `10·log10(1 / MSE)` for images in `[0, 1]`; infinite for identical inputs.
pub fn psnr<T: Real>(a: ArrayView3<T>, b: ArrayView3<T>) -> Result<f64> {
    check_same(a.shape(), b.shape())?;
    let n = a.len().max(1) as f64;
    let mse: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum::<f64>() / n;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

fn window<T: Real>() -> [T; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let raw: [f64; SSIM_WINDOW] = std::array::from_fn(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
    let sum: f64 = raw.iter().sum();
    raw.map(|v| T::lit(v / sum))
}

/// Separable Gaussian blur, zero padded, same size. Self-adjoint because the
/// kernel is symmetric.
fn blur<T: Real>(x: ArrayView2<T>, k: &[T; SSIM_WINDOW]) -> Array2<T> {
    let (h, w) = x.dim();
    let r = SSIM_WINDOW / 2;
    let mut tmp = Array2::zeros((h, w));
    for y in 0..h {
        for c in 0..w {
            let mut s = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                let cc = c as isize + i as isize - r as isize;
                if cc >= 0 && (cc as usize) < w {
                    s += kv * x[[y, cc as usize]];
                }
            }
            tmp[[y, c]] = s;
        }
    }
    let mut out = Array2::zeros((h, w));
    for y in 0..h {
        for (i, &kv) in k.iter().enumerate() {
            let yy = y as isize + i as isize - r as isize;
            if yy >= 0 && (yy as usize) < h {
                let src = tmp.row(yy as usize);
                let mut dst = out.row_mut(y);
                dst.scaled_add(kv, &src);
            }
        }
    }
    out
}

/// Mean SSIM over pixels and channels; `grad` receives `d SSIM / d a`.
fn ssim_impl<T: Real>(a: ArrayView3<T>, b: ArrayView3<T>, want_grad: bool) -> Result<(T, Option<Array3<T>>)> {
    check_same(a.shape(), b.shape())?;
    let (h, w, ch) = a.dim();
    if h == 0 || w == 0 || ch == 0 {
        return Err(Error::invalid("empty image"));
    }
    let k = window::<T>();
    let c1 = T::lit(SSIM_K1 * SSIM_K1);
    let c2 = T::lit(SSIM_K2 * SSIM_K2);
    let two = T::lit(2.0);
    let n = T::from_usize_lossy(h * w * ch);
    let mut total = T::zero();
    let mut grad = want_grad.then(|| Array3::zeros((h, w, ch)));
    for c in 0..ch {
        let x = a.index_axis(Axis(2), c);
        let y = b.index_axis(Axis(2), c);
        let mx = blur(x, &k);
        let my = blur(y, &k);
        let exx = blur((&x * &x).view(), &k);
        let eyy = blur((&y * &y).view(), &k);
        let exy = blur((&x * &y).view(), &k);
        let mut g_mu = Array2::zeros((h, w));
        let mut g_xx = Array2::zeros((h, w));
        let mut g_xy = Array2::zeros((h, w));
        for i in 0..h {
            for j in 0..w {
                let (ux, uy) = (mx[[i, j]], my[[i, j]]);
                let sxx = exx[[i, j]] - ux * ux;
                let syy = eyy[[i, j]] - uy * uy;
                let sxy = exy[[i, j]] - ux * uy;
                let a1 = two * ux * uy + c1;
                let a2 = two * sxy + c2;
                let b1 = ux * ux + uy * uy + c1;
                let b2 = sxx + syy + c2;
                let s = (a1 * a2) / (b1 * b2);
                total += s;
                if want_grad {
                    let ds_sxy = s * two / a2;
                    let ds_sxx = -s / b2;
                    g_mu[[i, j]] = s * (two * uy / a1 - two * ux / b1) - ds_sxy * uy - two * ds_sxx * ux;
                    g_xx[[i, j]] = ds_sxx;
                    g_xy[[i, j]] = ds_sxy;
                }
            }
        }
        if let Some(g) = grad.as_mut() {
            let bmu = blur(g_mu.view(), &k);
            let bxx = blur(g_xx.view(), &k);
            let bxy = blur(g_xy.view(), &k);
            Zip::from(g.index_axis_mut(Axis(2), c))
                .and(&bmu)
                .and(&bxx)
                .and(&bxy)
                .and(&x)
                .and(&y)
                .for_each(|o, &m, &xx, &xy, &xv, &yv| *o = (m + two * xx * xv + xy * yv) / n);
        }
    }
    Ok((total / n, grad))
}

/// Mean SSIM (11×11 Gaussian window, σ = 1.5, zero padded), averaged over
/// channels.
pub fn ssim<T: Real>(a: ArrayView3<T>, b: ArrayView3<T>) -> Result<T> {
    Ok(ssim_impl(a, b, false)?.0)
}

/// SSIM and its gradient with respect to the first image.
pub fn ssim_with_grad<T: Real>(a: ArrayView3<T>, b: ArrayView3<T>) -> Result<(T, Array3<T>)> {
    let (s, g) = ssim_impl(a, b, true)?;
    Ok((s, g.expect("gradient requested")))
}

/// Mean absolute difference.
pub fn l1<T: Real>(a: ArrayView3<T>, b: ArrayView3<T>) -> Result<T> {
    check_same(a.shape(), b.shape())?;
    let n = T::from_usize_lossy(a.len().max(1));
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (*x - *y).abs()).sum::<T>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, h: usize, w: usize) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((h, w, 3), |_| rng.random_range(0.0..1.0))
    }

    #[test]
    fn identical_images() {
        let x = noise(1, 20, 17);
        assert_eq!(ssim(x.view(), x.view()).unwrap(), 1.0);
        assert_eq!(psnr(x.view(), x.view()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_offset_psnr() {
        let x = Array3::from_elem((8, 8, 3), 0.3);
        let y = Array3::from_elem((8, 8, 3), 0.4);
        assert!((psnr(x.view(), y.view()).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn negative_scores_lower() {
        let x = noise(2, 24, 24);
        let neg = x.mapv(|v| 1.0 - v);
        assert!(ssim(x.view(), neg.view()).unwrap() < ssim(x.view(), x.view()).unwrap());
    }

    #[test]
    fn shape_mismatch() {
        assert!(ssim(noise(3, 4, 4).view(), noise(3, 4, 5).view()).is_err());
        assert!(psnr(noise(3, 4, 4).view(), noise(3, 5, 4).view()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = noise(4, 14, 13);
        let y = noise(5, 14, 13);
        let (_, g) = ssim_with_grad(x.view(), y.view()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-6;
        for _ in 0..40 {
            let idx = (rng.random_range(0..14), rng.random_range(0..13), rng.random_range(0..3));
            let mut p = x.clone();
            p[idx] += h;
            let mut m = x.clone();
            m[idx] -= h;
            let fd = (ssim(p.view(), y.view()).unwrap() - ssim(m.view(), y.view()).unwrap()) / (2.0 * h);
            assert!((fd - g[idx]).abs() <= 1e-4 * fd.abs().max(1e-6), "{idx:?}: {fd} vs {}", g[idx]);
        }
    }
}
