//! Declarative description of an oracle scene.

use hybrid_splat::scene::{CameraPose, Intrinsics, PoseRecord};
use hybrid_splat::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::trace::{add, axis_angle, cross, dot, normalize, scale, sub, Albedo, V3};

pub const DEFAULT_FEATURE_DIM: usize = 8;
/// Feature channels that are not primitive-id hashes.
pub const BASE_FEATURES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StaticPrimitive {
    /// Rectangle spanned by `u_axis` and `normal × u_axis`.
    Plane {
        center: V3,
        normal: V3,
        u_axis: V3,
        half_size: [f64; 2],
        albedo: Albedo,
    },
    /// Oriented box; `rotation` is an axis-angle vector (radians).
    Box {
        center: V3,
        half_size: V3,
        #[serde(default)]
        rotation: V3,
        albedo: Albedo,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    Box {
        half_size: V3,
        #[serde(default)]
        rotation: V3,
    },
}

/// Center trajectory of a dynamic primitive; `speed` is meters per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    Linear {
        start: V3,
        direction: V3,
        speed: f64,
    },
    /// Circle around `center` in the plane orthogonal to `axis`.
    Circular {
        center: V3,
        axis: V3,
        radius: f64,
        speed: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Motion {
    pub fn position(&self, t: f64) -> V3 {
        match self {
            Motion::Linear { start, direction, speed } => add(*start, scale(normalize(*direction), speed * t)),
            Motion::Circular {
                center,
                axis,
                radius,
                speed,
                phase,
            } => {
                let (e1, e2) = orthonormal_pair(*axis);
                let a = phase + speed * t / radius;
                add(*center, add(scale(e1, radius * a.cos()), scale(e2, radius * a.sin())))
            }
        }
    }
}

fn orthonormal_pair(axis: V3) -> (V3, V3) {
    let n = normalize(axis);
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(sub(helper, scale(n, dot(helper, n))));
    (e1, cross(n, e1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicPrimitive {
    pub shape: Shape,
    pub motion: Motion,
    pub albedo: Albedo,
}

/// Ego camera path. Image `+y` points along `down`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// Camera translating by `velocity` per frame while facing `forward`.
    Linear {
        start: V3,
        velocity: V3,
        forward: V3,
        #[serde(default = "default_down")]
        down: V3,
    },
    /// Camera on a horizontal arc around `target`, always looking at it.
    Orbit {
        target: V3,
        radius: f64,
        height: f64,
        start_angle: f64,
        angle_per_frame: f64,
    },
    /// Explicit per-frame poses; intrinsics in the records are ignored.
    Explicit { poses: Vec<PoseRecord> },
}

fn default_down() -> V3 {
    [0.0, 1.0, 0.0]
}

/// View-inconsistency injected into images and point maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Jitter {
    #[default]
    None,
    /// Per-frame rigid motion of the whole world (radians, meters, 1σ per axis).
    Rigid { sigma_rot: f64, sigma_trans: f64 },
    /// Per-frame smooth image-plane warp with per-pixel displacement ~σ_px.
    Warp { sigma_px: f64 },
}

impl Jitter {
    pub fn is_identity(&self) -> bool {
        match self {
            Jitter::None => true,
            Jitter::Rigid { sigma_rot, sigma_trans } => *sigma_rot == 0.0 && *sigma_trans == 0.0,
            Jitter::Warp { sigma_px } => *sigma_px == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSceneSpec {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels; defaults to `0.9 · width`.
    #[serde(default)]
    pub focal: Option<f64>,
    pub frames: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub background: V3,
    #[serde(default)]
    pub statics: Vec<StaticPrimitive>,
    #[serde(default)]
    pub dynamics: Vec<DynamicPrimitive>,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub jitter: Jitter,
    /// Side of the per-pixel supersampling grid for images.
    #[serde(default = "default_supersample")]
    pub supersample: usize,
}

fn default_feature_dim() -> usize {
    DEFAULT_FEATURE_DIM
}

fn default_supersample() -> usize {
    2
}

fn albedo_ok(a: &Albedo, what: &str) -> Result<()> {
    a.validate().map_err(|e| Error::invalid(format!("{what}: {e}")))
}

fn positive(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what}: sizes must be finite and > 0")))
    }
}

impl OracleSceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn focal(&self) -> f64 {
        self.focal.unwrap_or(0.9 * self.width as f64)
    }

    pub fn intrinsics(&self) -> Intrinsics<f64> {
        Intrinsics::centered(self.focal(), self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be non-zero"));
        }
        if self.frames < 2 {
            return Err(Error::invalid(format!("need at least 2 frames, got {}", self.frames)));
        }
        if self.feature_dim < BASE_FEATURES {
            return Err(Error::invalid(format!("feature_dim must be at least {BASE_FEATURES}")));
        }
        if self.supersample == 0 {
            return Err(Error::invalid("supersample must be at least 1"));
        }
        if !(self.focal() > 0.0) {
            return Err(Error::invalid("focal length must be positive"));
        }
        for (i, p) in self.statics.iter().enumerate() {
            let what = format!("static primitive {i}");
            match p {
                StaticPrimitive::Plane { half_size, albedo, normal, .. } => {
                    positive(half_size, &what)?;
                    albedo_ok(albedo, &what)?;
                    if dot(*normal, *normal) == 0.0 {
                        return Err(Error::invalid(format!("{what}: zero normal")));
                    }
                }
                StaticPrimitive::Box { half_size, albedo, .. } => {
                    positive(half_size, &what)?;
                    albedo_ok(albedo, &what)?;
                }
            }
        }
        for (i, d) in self.dynamics.iter().enumerate() {
            let what = format!("dynamic primitive {i}");
            match &d.shape {
                Shape::Sphere { radius } => positive(&[*radius], &what)?,
                Shape::Box { half_size, .. } => positive(half_size, &what)?,
            }
            if let Motion::Circular { radius, .. } = d.motion {
                positive(&[radius], &what)?;
            }
            albedo_ok(&d.albedo, &what)?;
        }
        let sigmas: Vec<f64> = match self.jitter {
            Jitter::None => vec![],
            Jitter::Rigid { sigma_rot, sigma_trans } => vec![sigma_rot, sigma_trans],
            Jitter::Warp { sigma_px } => vec![sigma_px],
        };
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("jitter sigma must be finite and >= 0"));
        }
        if let Trajectory::Explicit { poses } = &self.trajectory {
            if poses.len() != self.frames {
                return Err(Error::invalid(format!(
                    "explicit trajectory has {} poses for {} frames",
                    poses.len(),
                    self.frames
                )));
            }
        }
        for i in 0..self.frames {
            self.camera_at(i as f64)?;
        }
        Ok(())
    }

    /// Ego pose at continuous time `t` (frames). Explicit trajectories are
    /// linearly interpolated in position and hold the nearest rotation.
    pub fn camera_at(&self, t: f64) -> Result<CameraPose<f64>> {
        let intr = self.intrinsics();
        let ts = t.max(0.0).floor() as usize;
        match &self.trajectory {
            Trajectory::Linear {
                start,
                velocity,
                forward,
                down,
            } => {
                let eye = add(*start, scale(*velocity, t));
                CameraPose::look_at(eye, add(eye, *forward), *down, intr, ts)
            }
            Trajectory::Orbit {
                target,
                radius,
                height,
                start_angle,
                angle_per_frame,
            } => {
                let a = start_angle + angle_per_frame * t;
                let eye = [target[0] + radius * a.sin(), target[1] + height, target[2] - radius * a.cos()];
                CameraPose::look_at(eye, *target, default_down(), intr, ts)
            }
            Trajectory::Explicit { poses } => {
                let n = poses.len();
                let lo = (t.floor().max(0.0) as usize).min(n - 1);
                let hi = (lo + 1).min(n - 1);
                let f = (t - lo as f64).clamp(0.0, 1.0);
                let a: CameraPose<f64> = poses[lo].to_pose()?;
                let b: CameraPose<f64> = poses[hi].to_pose()?;
                let (ca, cb) = (a.center(), b.center());
                let c = add(ca, scale(sub(cb, ca), f));
                let base = if f < 0.5 { a } else { b };
                let mut p = base.translated(sub(c, base.center()));
                p.fx = intr.fx;
                p.fy = intr.fy;
                p.cx = intr.cx;
                p.cy = intr.cy;
                p.width = intr.width;
                p.height = intr.height;
                p.timestamp = ts;
                p.validate()?;
                Ok(p)
            }
        }
    }

    /// Per-frame reference poses with timestamps `0..frames`.
    pub fn poses(&self) -> Result<Vec<CameraPose<f64>>> {
        (0..self.frames).map(|i| self.camera_at(i as f64)).collect()
    }
}

/// Box orientation rows from an axis-angle vector.
pub(crate) fn box_axes(rotation: V3) -> [V3; 3] {
    let m = axis_angle(rotation);
    // Columns of the rotation are the box axes in world space.
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}
