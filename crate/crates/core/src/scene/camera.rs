use serde::{Deserialize, Serialize};

use super::linalg::{cross3, det3, mat3_mul, mat3_tvec, mat3_vec, normalize3, sub3, transpose3, Mat2, Mat3, Vec3};
use crate::{Error, Real, Result};

pub const NEAR_PLANE: f64 = 0.05;
pub const FAR_PLANE: f64 = 1000.0;
/// Low-pass term added to the diagonal of every projected covariance (px²).
pub const SCREEN_BLUR: f64 = 0.3;

/// Pinhole camera. Convention: x right, y down, z forward; `world_to_cam`
/// maps world points into the camera frame; pixel `(i, j)` covers
/// `[j, j+1) × [i, i+1)` so its center sits at `(j + 0.5, i + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
    pub timestamp: usize,
}

/// Result of projecting a point. `culled` is set for points at or before the
/// near plane (or past the far plane); `u`/`v` are meaningless then.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub u: T,
    pub v: T,
    pub depth: T,
    pub culled: bool,
}

impl<T: Real> CameraPose<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: T,
        fy: T,
        cx: T,
        cy: T,
        width: usize,
        height: usize,
        world_to_cam: [[T; 4]; 4],
        timestamp: usize,
    ) -> Result<Self> {
        let rotation = [
            [world_to_cam[0][0], world_to_cam[0][1], world_to_cam[0][2]],
            [world_to_cam[1][0], world_to_cam[1][1], world_to_cam[1][2]],
            [world_to_cam[2][0], world_to_cam[2][1], world_to_cam[2][2]],
        ];
        let translation = [world_to_cam[0][3], world_to_cam[1][3], world_to_cam[2][3]];
        let bottom = world_to_cam[3];
        if bottom != [T::zero(), T::zero(), T::zero(), T::one()] {
            return Err(Error::invalid("world_to_cam bottom row must be [0, 0, 0, 1]"));
        }
        let pose = CameraPose {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
            timestamp,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Camera at `eye` looking at `target`, with `down` roughly along image +y.
    pub fn look_at(
        eye: Vec3<T>,
        target: Vec3<T>,
        down: Vec3<T>,
        intrinsics: Intrinsics<T>,
        timestamp: usize,
    ) -> Result<Self> {
        let forward = normalize3(sub3(target, eye));
        let right = normalize3(cross3(down, forward));
        let down = cross3(forward, right);
        let rotation = [right, down, forward];
        let t = mat3_vec(&rotation, eye);
        let pose = CameraPose {
            fx: intrinsics.fx,
            fy: intrinsics.fy,
            cx: intrinsics.cx,
            cy: intrinsics.cy,
            width: intrinsics.width,
            height: intrinsics.height,
            rotation,
            translation: [-t[0], -t[1], -t[2]],
            timestamp,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-6).max(T::epsilon() * T::lit(64.0));
        let rrt = mat3_mul(&self.rotation, &transpose3(&self.rotation));
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { T::one() } else { T::zero() };
                if !((rrt[i][j] - want).abs() <= tol) {
                    return Err(Error::invalid("camera rotation is not orthonormal"));
                }
            }
        }
        if !((det3(&self.rotation) - T::one()).abs() <= tol) {
            return Err(Error::invalid("camera rotation determinant is not +1"));
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be non-zero"));
        }
        let (w, h) = (T::from_usize_lossy(self.width), T::from_usize_lossy(self.height));
        if !(self.cx > T::zero() && self.cx < w && self.cy > T::zero() && self.cy < h) {
            return Err(Error::invalid("principal point outside the image"));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("camera translation is not finite"));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Intrinsics<T> {
        Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }

    /// Camera center in world coordinates: `-Rᵀ t`.
    pub fn center(&self) -> Vec3<T> {
        let c = mat3_tvec(&self.rotation, self.translation);
        [-c[0], -c[1], -c[2]]
    }

    pub fn to_camera(&self, x: Vec3<T>) -> Vec3<T> {
        let r = mat3_vec(&self.rotation, x);
        [r[0] + self.translation[0], r[1] + self.translation[1], r[2] + self.translation[2]]
    }

    pub fn world_to_cam(&self) -> [[T; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        let (z, o) = (T::zero(), T::one());
        [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
            [z, z, z, o],
        ]
    }

    /// Same pose with the camera center moved by `offset` (world units).
    pub fn translated(&self, offset: Vec3<T>) -> Self {
        let d = mat3_vec(&self.rotation, offset);
        let mut p = self.clone();
        for k in 0..3 {
            p.translation[k] = p.translation[k] - d[k];
        }
        p
    }

    pub fn project_point(&self, x_world: Vec3<T>) -> Projection<T> {
        let p = self.to_camera(x_world);
        let depth = p[2];
        if !(depth > T::lit(NEAR_PLANE)) || depth > T::lit(FAR_PLANE) {
            return Projection {
                u: T::zero(),
                v: T::zero(),
                depth,
                culled: true,
            };
        }
        Projection {
            u: self.fx * p[0] / depth + self.cx,
            v: self.fy * p[1] / depth + self.cy,
            depth,
            culled: false,
        }
    }

    /// EWA projection `J W Σ Wᵀ Jᵀ + blur·I`. Returns `None` for culled points.
    pub fn project_covariance(&self, x_world: Vec3<T>, cov: &Mat3<T>) -> Option<Mat2<T>> {
        let p = self.to_camera(x_world);
        if !(p[2] > T::lit(NEAR_PLANE)) || p[2] > T::lit(FAR_PLANE) {
            return None;
        }
        let j = self.projection_jacobian(p);
        let sc = mat3_mul(&mat3_mul(&self.rotation, cov), &transpose3(&self.rotation));
        Some(ewa_2d(&j, &sc, T::lit(SCREEN_BLUR)))
    }

    /// Jacobian of the pinhole projection at camera-space point `p`.
    #[inline]
    pub fn projection_jacobian(&self, p: Vec3<T>) -> [[T; 3]; 2] {
        let iz = T::one() / p[2];
        let iz2 = iz * iz;
        [
            [self.fx * iz, T::zero(), -self.fx * p[0] * iz2],
            [T::zero(), self.fy * iz, -self.fy * p[1] * iz2],
        ]
    }
}

/// `J Σ Jᵀ + blur·I` for a 2×3 Jacobian.
#[inline]
pub fn ewa_2d<T: Real>(j: &[[T; 3]; 2], sc: &Mat3<T>, blur: T) -> Mat2<T> {
    let mut js = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            js[r][c] = j[r][0] * sc[0][c] + j[r][1] * sc[1][c] + j[r][2] * sc[2][c];
        }
    }
    let a = js[0][0] * j[0][0] + js[0][1] * j[0][1] + js[0][2] * j[0][2] + blur;
    let b = js[0][0] * j[1][0] + js[0][1] * j[1][1] + js[0][2] * j[1][2];
    let c = js[1][0] * j[1][0] + js[1][1] * j[1][1] + js[1][2] * j[1][2] + blur;
    [[a, b], [b, c]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> Intrinsics<T> {
    /// Centered principal point with square pixels.
    pub fn centered(focal: T, width: usize, height: usize) -> Self {
        let half = T::lit(0.5);
        Intrinsics {
            fx: focal,
            fy: focal,
            cx: T::from_usize_lossy(width) * half,
            cy: T::from_usize_lossy(height) * half,
            width,
            height,
        }
    }
}

/// JSON form of a pose, shared by bundle `poses.json` and trajectory files.
/// `world_to_cam` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_to_cam: [f64; 16],
    pub t: f64,
}

impl PoseRecord {
    pub fn from_pose<T: Real>(pose: &CameraPose<T>, t: T) -> Self {
        let m = pose.world_to_cam();
        let mut flat = [0.0; 16];
        for (k, v) in flat.iter_mut().enumerate() {
            *v = m[k / 4][k % 4].as_f64();
        }
        PoseRecord {
            fx: pose.fx.as_f64(),
            fy: pose.fy.as_f64(),
            cx: pose.cx.as_f64(),
            cy: pose.cy.as_f64(),
            width: pose.width,
            height: pose.height,
            world_to_cam: flat,
            t: t.as_f64(),
        }
    }

    /// Converts to a pose; `timestamp` is `t` rounded down (continuous time
    /// stays available to callers through `self.t`).
    pub fn to_pose<T: Real>(&self) -> Result<CameraPose<T>> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::invalid(format!("pose time {} must be finite and non-negative", self.t)));
        }
        let mut m = [[T::zero(); 4]; 4];
        for (k, v) in self.world_to_cam.iter().enumerate() {
            m[k / 4][k % 4] = T::lit(*v);
        }
        CameraPose::new(
            T::lit(self.fx),
            T::lit(self.fy),
            T::lit(self.cx),
            T::lit(self.cy),
            self.width,
            self.height,
            m,
            self.t.floor() as usize,
        )
    }
}
