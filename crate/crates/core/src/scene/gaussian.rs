use serde::{Deserialize, Serialize};

use super::linalg::{mat3_mul, sym3_grad_unpack, sym3_pack, transpose3, Mat3, Vec3};
use crate::{sigmoid, Error, Real, Result};

pub const MIN_SCALE: f64 = 1e-6;
pub const MAX_SCALE: f64 = 1e3;

/// One splat. Rotation is a `(w, x, y, z)` quaternion; scales are stored as
/// logs and opacity as a logit so every field is unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian3D<T> {
    pub position: Vec3<T>,
    pub rotation: [T; 4],
    pub log_scale: Vec3<T>,
    pub opacity_logit: T,
    /// `(degree + 1)²` RGB coefficient triples.
    pub sh: Vec<[T; 3]>,
    pub feature: Vec<T>,
    pub dynamic_score: T,
}

impl<T: Real> Gaussian3D<T> {
    pub fn opacity(&self) -> T {
        sigmoid(self.opacity_logit)
    }

    pub fn sh_degree(&self) -> usize {
        sh_degree_for_len(self.sh.len()).unwrap_or(0)
    }

    pub fn covariance(&self) -> Result<Mat3<T>> {
        covariance_from_rotation_scale(self.rotation, self.log_scale)
    }

    /// Renormalizes the rotation and clamps scales into `[1e-6, 1e3]`.
    pub fn sanitize(&mut self) {
        self.rotation = normalize_quat(self.rotation);
        let lo = T::lit(MIN_SCALE.ln());
        let hi = T::lit(MAX_SCALE.ln());
        for s in &mut self.log_scale {
            *s = s.max(lo).min(hi);
        }
    }
}

/// Number of SH bands for a coefficient count, if it is a perfect square ≤ 16.
pub fn sh_degree_for_len(len: usize) -> Option<usize> {
    (0..=3).find(|d| (d + 1) * (d + 1) == len)
}

pub fn normalize_quat<T: Real>(q: [T; 4]) -> [T; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if n > T::zero() {
        [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
    } else {
        [T::one(), T::zero(), T::zero(), T::zero()]
    }
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_rotation<T: Real>(q: [T; 4]) -> Mat3<T> {
    let [w, x, y, z] = q;
    let one = T::one();
    let two = T::lit(2.0);
    [
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ]
}

/// Σ = R·diag(exp(s))²·Rᵀ. The quaternion is normalized internally.
pub fn covariance_from_rotation_scale<T: Real>(rotation: [T; 4], log_scale: Vec3<T>) -> Result<Mat3<T>> {
    let n2 = rotation.iter().fold(T::zero(), |a, &v| a + v * v);
    if !(n2 > T::zero()) || !n2.is_finite() {
        return Err(Error::invalid("rotation quaternion has zero or non-finite norm"));
    }
    Ok(covariance_unchecked(normalize_quat(rotation), log_scale))
}

#[inline]
fn covariance_unchecked<T: Real>(unit_q: [T; 4], log_scale: Vec3<T>) -> Mat3<T> {
    let r = quat_to_rotation(unit_q);
    let s = [log_scale[0].exp(), log_scale[1].exp(), log_scale[2].exp()];
    let mut m = r;
    for row in &mut m {
        for j in 0..3 {
            row[j] = row[j] * s[j];
        }
    }
    let mut sigma = mat3_mul(&m, &transpose3(&m));
    // exact symmetry
    for i in 0..3 {
        for j in (i + 1)..3 {
            sigma[j][i] = sigma[i][j];
        }
    }
    sigma
}

/// Packed `[xx, xy, xz, yy, yz, zz]` covariance.
pub fn packed_covariance<T: Real>(rotation: [T; 4], log_scale: Vec3<T>) -> [T; 6] {
    sym3_pack(&covariance_unchecked(normalize_quat(rotation), log_scale))
}

/// Chain rule through [`covariance_from_rotation_scale`].
///
/// `grad_cov` is the gradient w.r.t. the packed covariance. Returns the
/// gradient w.r.t. the raw (unnormalized) quaternion and the log-scales.
pub fn covariance_backward<T: Real>(rotation: [T; 4], log_scale: Vec3<T>, grad_cov: &[T; 6]) -> ([T; 4], Vec3<T>) {
    let norm = rotation.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let q = normalize_quat(rotation);
    let r = quat_to_rotation(q);
    let s = [log_scale[0].exp(), log_scale[1].exp(), log_scale[2].exp()];
    let g = sym3_grad_unpack(grad_cov);

    // Σ = M Mᵀ with M = R S; dL/dM = (G + Gᵀ) M = 2 G M for symmetric G.
    let mut m = r;
    for row in &mut m {
        for j in 0..3 {
            row[j] = row[j] * s[j];
        }
    }
    let gm = mat3_mul(&g, &m);
    let two = T::lit(2.0);
    let mut dm = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            dm[i][j] = two * gm[i][j];
        }
    }

    let mut d_log_scale = [T::zero(); 3];
    let mut dr = [[T::zero(); 3]; 3];
    for j in 0..3 {
        let mut acc = T::zero();
        for i in 0..3 {
            acc = acc + r[i][j] * dm[i][j];
            dr[i][j] = dm[i][j] * s[j];
        }
        d_log_scale[j] = acc * s[j];
    }

    let dq_unit = rotation_backward(q, &dr);
    // Through q̂ = q / |q|.
    let proj = dq_unit[0] * q[0] + dq_unit[1] * q[1] + dq_unit[2] * q[2] + dq_unit[3] * q[3];
    let mut dq = [T::zero(); 4];
    for k in 0..4 {
        dq[k] = (dq_unit[k] - q[k] * proj) / norm;
    }
    (dq, d_log_scale)
}

/// Gradient of `quat_to_rotation` w.r.t. the quaternion components, given dL/dR.
pub fn rotation_backward<T: Real>(q: [T; 4], dr: &Mat3<T>) -> [T; 4] {
    let [w, x, y, z] = q;
    let two = T::lit(2.0);
    let dw = two
        * (x * (dr[2][1] - dr[1][2]) + y * (dr[0][2] - dr[2][0]) + z * (dr[1][0] - dr[0][1]));
    let dx = two
        * (-two * x * (dr[1][1] + dr[2][2])
            + y * (dr[0][1] + dr[1][0])
            + z * (dr[0][2] + dr[2][0])
            + w * (dr[2][1] - dr[1][2]));
    let dy = two
        * (-two * y * (dr[0][0] + dr[2][2])
            + x * (dr[0][1] + dr[1][0])
            + z * (dr[1][2] + dr[2][1])
            + w * (dr[0][2] - dr[2][0]));
    let dz = two
        * (-two * z * (dr[0][0] + dr[1][1])
            + x * (dr[0][2] + dr[2][0])
            + y * (dr[1][2] + dr[2][1])
            + w * (dr[1][0] - dr[0][1]));
    [dw, dx, dy, dz]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::linalg::sym3_eigenvalues;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_rotation_unit_scale() {
        let s = covariance_from_rotation_scale([1.0, 0.0, 0.0, 0.0], [0.0; 3]).unwrap();
        assert_eq!(s, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn quarter_turn_about_z_swaps_axes() {
        // R = [[0,-1,0],[1,0,0],[0,0,1]], S² = diag(4,1,1): R S² Rᵀ = diag(1,4,1).
        let h = std::f64::consts::FRAC_PI_4;
        let q = [h.cos(), 0.0, 0.0, h.sin()];
        let s = covariance_from_rotation_scale(q, [2f64.ln(), 0.0, 0.0]).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(s[i][j], expect[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert!(covariance_from_rotation_scale([0.0f64; 4], [0.0; 3]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let q = [0.8, -0.3, 0.5, 0.2];
        let ls = [-0.4, 0.3, 0.1];
        let g = [0.7, -1.1, 0.4, 0.9, 0.3, -0.6];
        let loss = |q: [f64; 4], ls: [f64; 3]| {
            let c = packed_covariance(q, ls);
            c.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (dq, ds) = covariance_backward(q, ls, &g);
        let h = 1e-6;
        for k in 0..4 {
            let (mut a, mut b) = (q, q);
            a[k] += h;
            b[k] -= h;
            let fd = (loss(a, ls) - loss(b, ls)) / (2.0 * h);
            assert_abs_diff_eq!(dq[k], fd, epsilon = 1e-7);
        }
        for k in 0..3 {
            let (mut a, mut b) = (ls, ls);
            a[k] += h;
            b[k] -= h;
            let fd = (loss(q, a) - loss(q, b)) / (2.0 * h);
            assert_abs_diff_eq!(ds[k], fd, epsilon = 1e-7);
        }
    }

    proptest! {
        #[test]
        fn sign_invariant_symmetric_psd(
            w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            s0 in -3.0f64..2.0, s1 in -3.0f64..2.0, s2 in -3.0f64..2.0,
        ) {
            prop_assume!(w * w + x * x + y * y + z * z > 1e-3);
            let ls = [s0, s1, s2];
            let a = covariance_from_rotation_scale([w, x, y, z], ls).unwrap();
            let b = covariance_from_rotation_scale([-w, -x, -y, -z], ls).unwrap();
            prop_assert_eq!(a, b);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((a[i][j] - a[j][i]).abs() <= 1e-12);
                }
            }
            let ev = sym3_eigenvalues(&a);
            prop_assert!(ev[0] >= -1e-9);
            let mut want: Vec<f64> = ls.iter().map(|s| (2.0 * s).exp()).collect();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for k in 0..3 {
                prop_assert!((ev[k] - want[k]).abs() <= 1e-8 * want[2].max(1.0));
            }
        }
    }
}
