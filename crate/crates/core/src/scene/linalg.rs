//! Fixed-size vector and matrix helpers on plain arrays.

use crate::Real;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];
pub type Mat2<T> = [[T; 2]; 2];

#[inline(always)]
pub fn add3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline(always)]
pub fn sub3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline(always)]
pub fn scale3<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline(always)]
pub fn dot3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
pub fn norm3<T: Real>(a: Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

#[inline(always)]
pub fn cross3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalize3<T: Real>(a: Vec3<T>) -> Vec3<T> {
    let n = norm3(a);
    if n > T::zero() {
        scale3(a, T::one() / n)
    } else {
        a
    }
}

#[inline(always)]
pub fn mat3_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// `mᵀ v`
#[inline(always)]
pub fn mat3_tvec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

#[inline(always)]
pub fn mat3_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

#[inline(always)]
pub fn transpose3<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn identity3<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Packs a symmetric matrix as `[xx, xy, xz, yy, yz, zz]`.
#[inline(always)]
pub fn sym3_pack<T: Real>(m: &Mat3<T>) -> [T; 6] {
    [m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]]
}

#[inline(always)]
pub fn sym3_unpack<T: Real>(p: &[T; 6]) -> Mat3<T> {
    [[p[0], p[1], p[2]], [p[1], p[3], p[4]], [p[2], p[4], p[5]]]
}

/// Full-matrix gradient from a packed-symmetric gradient: each off-diagonal
/// packed entry feeds two matrix slots, so it is split evenly.
#[inline(always)]
pub fn sym3_grad_unpack<T: Real>(g: &[T; 6]) -> Mat3<T> {
    let h = T::lit(0.5);
    [
        [g[0], g[1] * h, g[2] * h],
        [g[1] * h, g[3], g[4] * h],
        [g[2] * h, g[4] * h, g[5]],
    ]
}

/// Packed-symmetric gradient from a full-matrix gradient.
#[inline(always)]
pub fn sym3_grad_pack<T: Real>(g: &Mat3<T>) -> [T; 6] {
    [
        g[0][0],
        g[0][1] + g[1][0],
        g[0][2] + g[2][0],
        g[1][1],
        g[1][2] + g[2][1],
        g[2][2],
    ]
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending (trigonometric method).
pub fn sym3_eigenvalues<T: Real>(m: &Mat3<T>) -> [T; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let three = T::lit(3.0);
    if p1 <= T::epsilon() * T::epsilon() {
        let mut e = [m[0][0], m[1][1], m[2][2]];
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return e;
    }
    let q = (m[0][0] + m[1][1] + m[2][2]) / three;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + T::lit(2.0) * p1;
    let p = (p2 / T::lit(6.0)).sqrt();
    let mut b = *m;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (m[i][j] - if i == j { q } else { T::zero() }) / p;
        }
    }
    let r = (det3(&b) / T::lit(2.0)).max(-T::one()).min(T::one());
    let phi = r.acos() / three;
    let two_pi_3 = T::lit(2.0 * std::f64::consts::PI / 3.0);
    let e1 = q + T::lit(2.0) * p * phi.cos();
    let e3 = q + T::lit(2.0) * p * (phi + two_pi_3).cos();
    let e2 = three * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}
