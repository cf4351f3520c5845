//! Analytic per-pixel ray tracing of an oracle scene at one time.

use hybrid_splat::scene::CameraPose;
use hybrid_splat::{Error, Result};
use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::spec::{box_axes, Jitter, OracleSceneSpec, Shape, StaticPrimitive};
use crate::trace::{add, dot, hit_box, hit_plane, hit_sphere, mat_tvec, mat_vec, normalize, shade, sub, Albedo, Hit, Ray, V3};

#[derive(Debug, Clone)]
enum Geom {
    Plane { center: V3, normal: V3, u_axis: V3, half: [f64; 2] },
    Box { center: V3, axes: [V3; 3], half: V3 },
    Sphere { center: V3, radius: f64 },
}

#[derive(Debug, Clone)]
struct Object<'a> {
    geom: Geom,
    albedo: &'a Albedo,
    /// 1-based; 0 means no hit.
    id: u32,
    dynamic: bool,
}

impl Object<'_> {
    fn hit(&self, ray: &Ray) -> Option<Hit> {
        match &self.geom {
            Geom::Plane { center, normal, u_axis, half } => hit_plane(ray, *center, *normal, *u_axis, *half),
            Geom::Box { center, axes, half } => hit_box(ray, *center, axes, *half),
            Geom::Sphere { center, radius } => hit_sphere(ray, *center, *radius),
        }
    }

    fn contains(&self, p: V3) -> bool {
        match &self.geom {
            Geom::Plane { .. } => false,
            Geom::Box { center, axes, half } => {
                let d = sub(p, *center);
                (0..3).all(|k| dot(d, axes[k]).abs() < half[k])
            }
            Geom::Sphere { center, radius } => {
                let d = sub(p, *center);
                dot(d, d) < radius * radius
            }
        }
    }
}

/// All primitives placed at time `t`.
struct World<'a> {
    objects: Vec<Object<'a>>,
}

impl<'a> World<'a> {
    fn at(spec: &'a OracleSceneSpec, t: f64) -> Self {
        let mut objects = Vec::with_capacity(spec.statics.len() + spec.dynamics.len());
        for p in &spec.statics {
            let (geom, albedo) = match p {
                StaticPrimitive::Plane {
                    center,
                    normal,
                    u_axis,
                    half_size,
                    albedo,
                } => (
                    Geom::Plane {
                        center: *center,
                        normal: *normal,
                        u_axis: *u_axis,
                        half: *half_size,
                    },
                    albedo,
                ),
                StaticPrimitive::Box {
                    center,
                    half_size,
                    rotation,
                    albedo,
                } => (
                    Geom::Box {
                        center: *center,
                        axes: box_axes(*rotation),
                        half: *half_size,
                    },
                    albedo,
                ),
            };
            objects.push(Object {
                geom,
                albedo,
                id: objects.len() as u32 + 1,
                dynamic: false,
            });
        }
        for d in &spec.dynamics {
            let center = d.motion.position(t);
            let geom = match &d.shape {
                Shape::Sphere { radius } => Geom::Sphere { center, radius: *radius },
                Shape::Box { half_size, rotation } => Geom::Box {
                    center,
                    axes: box_axes(*rotation),
                    half: *half_size,
                },
            };
            objects.push(Object {
                geom,
                albedo: &d.albedo,
                id: objects.len() as u32 + 1,
                dynamic: true,
            });
        }
        World { objects }
    }

    fn trace(&self, ray: &Ray) -> Option<(Hit, &Object<'a>)> {
        let mut best: Option<(Hit, &Object)> = None;
        for o in &self.objects {
            if let Some(h) = o.hit(ray) {
                if best.as_ref().is_none_or(|(b, _)| h.t < b.t) {
                    best = Some((h, o));
                }
            }
        }
        best
    }
}

/// Rigid world transform `x ↦ R x + t` applied to the traced scene.
#[derive(Debug, Clone, Copy)]
struct Rigid {
    r: [V3; 3],
    t: V3,
}

/// Smooth image-plane displacement `σ√2 · sin(2π(a·x/W + b·y/H) + φ)` per axis.
#[derive(Debug, Clone, Copy)]
struct Warp {
    sigma: f64,
    modes: [[f64; 3]; 2],
}

impl Warp {
    fn offset(&self, x: f64, y: f64, w: f64, h: f64) -> [f64; 2] {
        let tau = 2.0 * std::f64::consts::PI;
        let amp = self.sigma * std::f64::consts::SQRT_2;
        self.modes.map(|[a, b, phi]| amp * (tau * (a * x / w + b * y / h) + phi).sin())
    }
}

#[derive(Debug, Clone, Copy)]
enum Perturbation {
    None,
    Rigid(Rigid),
    Warp(Warp),
}

impl Perturbation {
    fn draw<R: Rng>(jitter: &Jitter, rng: &mut R) -> Self {
        if jitter.is_identity() {
            return Perturbation::None;
        }
        match *jitter {
            Jitter::None => Perturbation::None,
            Jitter::Rigid { sigma_rot, sigma_trans } => {
                let nr = Normal::new(0.0, sigma_rot).expect("validated sigma");
                let nt = Normal::new(0.0, sigma_trans).expect("validated sigma");
                let w: V3 = std::array::from_fn(|_| nr.sample(rng));
                let t: V3 = std::array::from_fn(|_| nt.sample(rng));
                Perturbation::Rigid(Rigid {
                    r: crate::trace::axis_angle(w),
                    t,
                })
            }
            Jitter::Warp { sigma_px } => {
                let mut mode = || [rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)];
                Perturbation::Warp(Warp {
                    sigma: sigma_px,
                    modes: [mode(), mode()],
                })
            }
        }
    }
}

/// Traced frame before quantization.
#[derive(Debug, Clone)]
pub struct TracedFrame {
    pub image: Array3<f64>,
    pub pointmap: Array3<f64>,
    pub valid: Array2<bool>,
    /// Hit primitive id per pixel center (0 = miss).
    pub ids: Array2<u32>,
    pub dyn_mask: Array2<bool>,
}

fn pixel_ray(pose: &CameraPose<f64>, x: f64, y: f64) -> Ray {
    let d = [(x - pose.cx) / pose.fx, (y - pose.cy) / pose.fy, 1.0];
    Ray {
        origin: pose.center(),
        dir: normalize(mat_tvec(&pose.rotation, d)),
    }
}

struct Sample {
    color: V3,
    point: Option<V3>,
    id: u32,
    dynamic: bool,
}

fn sample(world: &World, ray: Ray, pert: &Perturbation, background: V3) -> Sample {
    let ray = match pert {
        Perturbation::Rigid(p) => Ray {
            origin: mat_tvec(&p.r, sub(ray.origin, p.t)),
            dir: mat_tvec(&p.r, ray.dir),
        },
        _ => ray,
    };
    match world.trace(&ray) {
        None => Sample {
            color: background,
            point: None,
            id: 0,
            dynamic: false,
        },
        Some((hit, obj)) => {
            let point = match pert {
                Perturbation::Rigid(p) => add(mat_vec(&p.r, hit.point), p.t),
                _ => hit.point,
            };
            Sample {
                color: shade(obj.albedo.at(hit.local), hit.normal),
                point: Some(point),
                id: obj.id,
                dynamic: obj.dynamic,
            }
        }
    }
}

fn check_camera(world: &World, pose: &CameraPose<f64>) -> Result<()> {
    let c = pose.center();
    match world.objects.iter().find(|o| o.contains(c)) {
        Some(o) => Err(Error::invalid(format!(
            "camera at time {} is inside primitive {}",
            pose.timestamp,
            o.id - 1
        ))),
        None => Ok(()),
    }
}

fn trace_with(spec: &OracleSceneSpec, pose: &CameraPose<f64>, t: f64, pert: Perturbation) -> Result<TracedFrame> {
    let world = World::at(spec, t);
    check_camera(&world, pose)?;
    let (h, w) = (pose.height, pose.width);
    let (wf, hf) = (w as f64, h as f64);
    let ss = spec.supersample;
    let mut frame = TracedFrame {
        image: Array3::zeros((h, w, 3)),
        pointmap: Array3::from_elem((h, w, 3), f64::NAN),
        valid: Array2::from_elem((h, w), false),
        ids: Array2::zeros((h, w)),
        dyn_mask: Array2::from_elem((h, w), false),
    };
    let displaced = |x: f64, y: f64| match &pert {
        Perturbation::Warp(wp) => {
            let d = wp.offset(x, y, wf, hf);
            (x + d[0], y + d[1])
        }
        _ => (x, y),
    };
    for i in 0..h {
        for j in 0..w {
            let (x, y) = displaced(j as f64 + 0.5, i as f64 + 0.5);
            let center = sample(&world, pixel_ray(pose, x, y), &pert, spec.background);
            if let Some(p) = center.point {
                for k in 0..3 {
                    frame.pointmap[[i, j, k]] = p[k];
                }
                frame.valid[[i, j]] = true;
            }
            frame.ids[[i, j]] = center.id;
            frame.dyn_mask[[i, j]] = match pert {
                Perturbation::None => center.dynamic,
                _ => {
                    let clean = sample(&world, pixel_ray(pose, j as f64 + 0.5, i as f64 + 0.5), &Perturbation::None, spec.background);
                    clean.dynamic
                }
            };
            let mut acc = [0.0; 3];
            if ss == 1 {
                acc = center.color;
            } else {
                for a in 0..ss {
                    for b in 0..ss {
                        let sx = j as f64 + (b as f64 + 0.5) / ss as f64;
                        let sy = i as f64 + (a as f64 + 0.5) / ss as f64;
                        let (sx, sy) = displaced(sx, sy);
                        let s = sample(&world, pixel_ray(pose, sx, sy), &pert, spec.background);
                        for k in 0..3 {
                            acc[k] += s.color[k];
                        }
                    }
                }
                let n = (ss * ss) as f64;
                acc = acc.map(|v| v / n);
            }
            for k in 0..3 {
                frame.image[[i, j, k]] = acc[k];
            }
        }
    }
    Ok(frame)
}

/// Traces reference frame `index` with its jitter drawn from `rng`.
pub fn trace_reference<R: Rng>(spec: &OracleSceneSpec, index: usize, rng: &mut R) -> Result<TracedFrame> {
    let pose = spec.camera_at(index as f64)?;
    let pert = Perturbation::draw(&spec.jitter, rng);
    trace_with(spec, &pose, index as f64, pert)
}

/// Noise-free trace of the scene at time `t` from an arbitrary pose.
pub fn trace_clean(spec: &OracleSceneSpec, pose: &CameraPose<f64>, t: f64) -> Result<TracedFrame> {
    trace_with(spec, pose, t, Perturbation::None)
}
