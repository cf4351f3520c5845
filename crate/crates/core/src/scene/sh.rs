//! Real spherical harmonics up to degree 3, in the basis ordering common to
//! Gaussian splatting implementations.

use super::linalg::Vec3;
use crate::{Error, Real, Result};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Offset added to the SH result before clamping below at zero.
pub const COLOR_OFFSET: f64 = 0.5;

pub fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Basis values `Y_k(d)` for `k < (degree+1)²` written into `out`.
pub fn sh_basis<T: Real>(degree: usize, d: Vec3<T>, out: &mut [T; 16]) {
    let [x, y, z] = d;
    out[0] = T::lit(SH_C0);
    if degree == 0 {
        return;
    }
    let c1 = T::lit(SH_C1);
    out[1] = -c1 * y;
    out[2] = c1 * z;
    out[3] = -c1 * x;
    if degree == 1 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    out[4] = T::lit(SH_C2[0]) * xy;
    out[5] = T::lit(SH_C2[1]) * yz;
    out[6] = T::lit(SH_C2[2]) * (two * zz - xx - yy);
    out[7] = T::lit(SH_C2[3]) * xz;
    out[8] = T::lit(SH_C2[4]) * (xx - yy);
    if degree == 2 {
        return;
    }
    out[9] = T::lit(SH_C3[0]) * y * (three * xx - yy);
    out[10] = T::lit(SH_C3[1]) * xy * z;
    out[11] = T::lit(SH_C3[2]) * y * (four * zz - xx - yy);
    out[12] = T::lit(SH_C3[3]) * z * (two * zz - three * xx - three * yy);
    out[13] = T::lit(SH_C3[4]) * x * (four * zz - xx - yy);
    out[14] = T::lit(SH_C3[5]) * z * (xx - yy);
    out[15] = T::lit(SH_C3[6]) * x * (xx - three * yy);
}

/// Partial derivatives `∂Y_k/∂(x, y, z)` of the basis polynomials, treating
/// the direction components as independent.
pub fn sh_basis_grad<T: Real>(degree: usize, d: Vec3<T>, out: &mut [[T; 3]; 16]) {
    let [x, y, z] = d;
    let zero = T::zero();
    out[0] = [zero; 3];
    if degree == 0 {
        return;
    }
    let c1 = T::lit(SH_C1);
    out[1] = [zero, -c1, zero];
    out[2] = [zero, zero, c1];
    out[3] = [-c1, zero, zero];
    if degree == 1 {
        return;
    }
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let six = T::lit(6.0);
    let eight = T::lit(8.0);
    let c2 = SH_C2.map(T::lit);
    out[4] = [c2[0] * y, c2[0] * x, zero];
    out[5] = [zero, c2[1] * z, c2[1] * y];
    out[6] = [-two * c2[2] * x, -two * c2[2] * y, four * c2[2] * z];
    out[7] = [c2[3] * z, zero, c2[3] * x];
    out[8] = [two * c2[4] * x, -two * c2[4] * y, zero];
    if degree == 2 {
        return;
    }
    let c3 = SH_C3.map(T::lit);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    out[9] = [c3[0] * six * x * y, c3[0] * (three * xx - three * yy), zero];
    out[10] = [c3[1] * y * z, c3[1] * x * z, c3[1] * x * y];
    out[11] = [
        -two * c3[2] * x * y,
        c3[2] * (four * zz - xx - three * yy),
        eight * c3[2] * y * z,
    ];
    out[12] = [
        -six * c3[3] * x * z,
        -six * c3[3] * y * z,
        c3[3] * (six * zz - three * xx - three * yy),
    ];
    out[13] = [
        c3[4] * (four * zz - three * xx - yy),
        -two * c3[4] * x * y,
        eight * c3[4] * x * z,
    ];
    out[14] = [two * c3[5] * x * z, -two * c3[5] * y * z, c3[5] * (xx - yy)];
    out[15] = [c3[6] * (three * xx - three * yy), -six * c3[6] * x * y, zero];
}

/// View-dependent color: SH contraction + 0.5, clamped below at zero.
pub fn eval_sh<T: Real>(coeffs: &[[T; 3]], view_dir: Vec3<T>, degree: usize) -> Result<[T; 3]> {
    if degree > 3 {
        return Err(Error::invalid(format!("SH degree {degree} not supported (max 3)")));
    }
    if coeffs.len() != coeff_count(degree) {
        return Err(Error::invalid(format!(
            "SH degree {degree} needs {} coefficients, got {}",
            coeff_count(degree),
            coeffs.len()
        )));
    }
    Ok(eval_sh_unchecked(coeffs, view_dir, degree))
}

#[inline]
pub fn eval_sh_unchecked<T: Real>(coeffs: &[[T; 3]], view_dir: Vec3<T>, degree: usize) -> [T; 3] {
    let mut basis = [T::zero(); 16];
    sh_basis(degree, view_dir, &mut basis);
    let off = T::lit(COLOR_OFFSET);
    let mut rgb = [off; 3];
    for (b, c) in basis.iter().zip(coeffs) {
        for ch in 0..3 {
            rgb[ch] += *b * c[ch];
        }
    }
    rgb.map(|v| v.max(T::zero()))
}

/// Degree-0 coefficient reproducing `rgb` exactly (inverse of the activation).
pub fn rgb_to_dc<T: Real>(rgb: [T; 3]) -> [T; 3] {
    rgb.map(|c| (c - T::lit(COLOR_OFFSET)) / T::lit(SH_C0))
}
