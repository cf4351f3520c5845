//! Ray/primitive intersection and shading. Shares no code with the splatting
//! renderer.

use serde::{Deserialize, Serialize};

pub type V3 = [f64; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn normalize(a: V3) -> V3 {
    let n = dot(a, a).sqrt();
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        a
    }
}

/// Surface color as a function of primitive-local coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Albedo {
    Solid { rgb: V3 },
    /// 3D checkerboard with cube size `period`.
    Checker { a: V3, b: V3, period: f64 },
    /// `base + amplitude · sin(2πx/p) sin(2πy/p) sin(2πz/p + ½π)`, a smooth
    /// pattern that is easy to reconstruct.
    Waves { base: V3, amplitude: V3, period: f64 },
}

impl Albedo {
    pub fn at(&self, local: V3) -> V3 {
        match self {
            Albedo::Solid { rgb } => *rgb,
            Albedo::Checker { a, b, period } => {
                let k: i64 = local.iter().map(|v| (v / period).floor() as i64).sum();
                if k.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Albedo::Waves { base, amplitude, period } => {
                let w = 2.0 * std::f64::consts::PI / period;
                let s = (w * local[0]).sin() * (w * local[1]).sin() + (w * local[2]).cos() * 0.5;
                std::array::from_fn(|c| (base[c] + amplitude[c] * s).clamp(0.0, 1.0))
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Albedo::Checker { period, .. } | Albedo::Waves { period, .. } if !(*period > 0.0) => Err("albedo period must be > 0".into()),
            _ => Ok(()),
        }
    }
}

/// Directional light used for a fixed Lambert term, so box faces differ.
const LIGHT: V3 = [0.3, -0.8, -0.5];
const AMBIENT: f64 = 0.65;

pub fn shade(albedo: V3, normal: V3) -> V3 {
    let l = normalize(LIGHT);
    let k = AMBIENT + (1.0 - AMBIENT) * dot(normal, l).abs();
    albedo.map(|c| (c * k).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: V3,
    pub dir: V3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: V3,
    pub normal: V3,
    /// Hit point in the primitive's own frame, for texturing.
    pub local: V3,
}

const T_MIN: f64 = 1e-9;

/// Finite rectangle through `center` spanned by `u_axis` and `normal × u_axis`.
pub fn hit_plane(ray: &Ray, center: V3, normal: V3, u_axis: V3, half: [f64; 2]) -> Option<Hit> {
    let n = normalize(normal);
    let den = dot(ray.dir, n);
    if den.abs() < 1e-12 {
        return None;
    }
    let t = dot(sub(center, ray.origin), n) / den;
    if !(t > T_MIN) {
        return None;
    }
    let p = add(ray.origin, scale(ray.dir, t));
    let u = normalize(sub(u_axis, scale(n, dot(u_axis, n))));
    let v = cross(n, u);
    let d = sub(p, center);
    let (a, b) = (dot(d, u), dot(d, v));
    if a.abs() > half[0] || b.abs() > half[1] {
        return None;
    }
    Some(Hit {
        t,
        point: p,
        normal: n,
        local: [a, b, 0.0],
    })
}

/// Box with orthonormal `axes` (rows) and half sizes, slab method.
pub fn hit_box(ray: &Ray, center: V3, axes: &[V3; 3], half: V3) -> Option<Hit> {
    let o = sub(ray.origin, center);
    let lo = [dot(o, axes[0]), dot(o, axes[1]), dot(o, axes[2])];
    let ld = [dot(ray.dir, axes[0]), dot(ray.dir, axes[1]), dot(ray.dir, axes[2])];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut axis0, mut sign0) = (0, 1.0);
    for k in 0..3 {
        if ld[k].abs() < 1e-15 {
            if lo[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / ld[k];
        let mut ta = (-half[k] - lo[k]) * inv;
        let mut tb = (half[k] - lo[k]) * inv;
        let mut s = -1.0;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
            s = 1.0;
        }
        if ta > t0 {
            t0 = ta;
            axis0 = k;
            sign0 = s;
        }
        t1 = t1.min(tb);
    }
    if t0 > t1 || !(t0 > T_MIN) {
        return None;
    }
    let local = std::array::from_fn(|k| lo[k] + t0 * ld[k]);
    Some(Hit {
        t: t0,
        point: add(ray.origin, scale(ray.dir, t0)),
        normal: scale(axes[axis0], sign0),
        local,
    })
}

pub fn hit_sphere(ray: &Ray, center: V3, radius: f64) -> Option<Hit> {
    let oc = sub(ray.origin, center);
    let b = dot(oc, ray.dir);
    let c = dot(oc, oc) - radius * radius;
    let a = dot(ray.dir, ray.dir);
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / a;
    if !(t > T_MIN) {
        return None;
    }
    let p = add(ray.origin, scale(ray.dir, t));
    let local = sub(p, center);
    Some(Hit {
        t,
        point: p,
        normal: scale(local, 1.0 / radius),
        local,
    })
}

/// Rotation matrix (rows are the rotated basis) from an axis-angle vector.
pub fn axis_angle(w: V3) -> [V3; 3] {
    let th = dot(w, w).sqrt();
    if th == 0.0 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let k = scale(w, 1.0 / th);
    let (s, c) = th.sin_cos();
    let v = 1.0 - c;
    [
        [c + k[0] * k[0] * v, k[0] * k[1] * v - k[2] * s, k[0] * k[2] * v + k[1] * s],
        [k[1] * k[0] * v + k[2] * s, c + k[1] * k[1] * v, k[1] * k[2] * v - k[0] * s],
        [k[2] * k[0] * v - k[1] * s, k[2] * k[1] * v + k[0] * s, c + k[2] * k[2] * v],
    ]
}

pub fn mat_vec(m: &[V3; 3], v: V3) -> V3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_tvec(m: &[V3; 3], v: V3) -> V3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}
