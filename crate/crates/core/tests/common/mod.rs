//! Random scenes and finite-difference probes shared by the integration tests.
#![allow(dead_code)]

use hybrid_splat::raster::{backprop_to_gaussians, render, render_backward, GaussianSnapshot, RenderGrads, RenderOptions};
use hybrid_splat::scene::{coeff_count, CameraPose, Gaussian3D, Intrinsics};
use ndarray::{Array2, Array3};
use rand::Rng;

pub fn camera(w: usize, h: usize) -> CameraPose<f64> {
    CameraPose::look_at([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], Intrinsics::centered(0.9 * w as f64, w, h), 0).unwrap()
}

/// Gaussians scattered in the frustum of [`camera`], some overlapping.
pub fn random_gaussians<R: Rng>(rng: &mut R, n: usize, sh_degree: usize) -> Vec<Gaussian3D<f64>> {
    (0..n)
        .map(|_| {
            let z = rng.random_range(1.5..4.0);
            Gaussian3D {
                position: [rng.random_range(-0.45..0.45) * z, rng.random_range(-0.45..0.45) * z, z],
                rotation: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                log_scale: [rng.random_range(-3.5..-1.8), rng.random_range(-3.5..-1.8), rng.random_range(-3.5..-1.8)],
                opacity_logit: rng.random_range(-2.0..3.0),
                sh: (0..coeff_count(sh_degree)).map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect(),
                feature: vec![],
                dynamic_score: 0.0,
            }
        })
        .collect()
}

pub struct Weights {
    pub color: Array3<f64>,
    pub alpha: Array2<f64>,
    pub depth: Array2<f64>,
    pub scalar: Array2<f64>,
}

impl Weights {
    pub fn random<R: Rng>(rng: &mut R, w: usize, h: usize) -> Self {
        Weights {
            color: Array3::from_shape_fn((h, w, 3), |_| rng.random_range(-1.0..1.0)),
            alpha: Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0)),
            depth: Array2::from_shape_fn((h, w), |_| rng.random_range(-0.3..0.3)),
            scalar: Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0)),
        }
    }

    pub fn grads(&self) -> RenderGrads<f64> {
        RenderGrads {
            color: Some(self.color.clone()),
            alpha: Some(self.alpha.clone()),
            depth: Some(self.depth.clone()),
            scalar: Some(self.scalar.clone()),
        }
    }
}

pub fn loss(gs: &[Gaussian3D<f64>], payload: &[f64], sh_degree: usize, pose: &CameraPose<f64>, w: &Weights) -> f64 {
    let snap = GaussianSnapshot::from_gaussians(gs, sh_degree).unwrap().with_payload(payload.to_vec()).unwrap();
    let opts = RenderOptions::smooth().with_payload(true).with_background([0.1, 0.2, 0.3]);
    let out = render(&snap, pose, &opts).unwrap();
    (&out.color * &w.color).sum() + (&out.alpha * &w.alpha).sum() + (&out.depth * &w.depth).sum() + (out.scalar.as_ref().unwrap() * &w.scalar).sum()
}

pub const CLASSES: [&str; 6] = ["position", "log_scale", "rotation", "opacity", "sh", "payload"];

/// Relative error with a small absolute floor so near-zero gradients do not
/// blow up the ratio.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// `probes` random coordinate probes of every parameter class of the
/// rasterizer. Returns `(class, analytic, finite difference)` per probe.
pub fn rasterizer_probes<R: Rng>(rng: &mut R, n: usize, probes_per_class: usize) -> Vec<(&'static str, f64, f64)> {
    let (w, h) = (24, 24);
    let sh_degree = 1;
    let pose = camera(w, h);
    let gs = random_gaussians(rng, n, sh_degree);
    let payload: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let weights = Weights::random(rng, w, h);

    let snap = GaussianSnapshot::from_gaussians(&gs, sh_degree).unwrap().with_payload(payload.clone()).unwrap();
    let opts = RenderOptions::smooth().with_payload(true).with_background([0.1, 0.2, 0.3]);
    let sg = render_backward(&snap, &pose, &opts, &weights.grads()).unwrap();
    let gg = backprop_to_gaussians(&gs, &sg).unwrap();

    let h_step = 1e-4;
    let mut out = Vec::new();
    for class in CLASSES {
        for _ in 0..probes_per_class {
            let i = rng.random_range(0..n);
            let (mut gp, mut gm) = (gs.clone(), gs.clone());
            let (mut pp, mut pm) = (payload.clone(), payload.clone());
            let analytic = match class {
                "position" => {
                    let k = rng.random_range(0..3);
                    gp[i].position[k] += h_step;
                    gm[i].position[k] -= h_step;
                    gg.positions[i][k]
                }
                "log_scale" => {
                    let k = rng.random_range(0..3);
                    gp[i].log_scale[k] += h_step;
                    gm[i].log_scale[k] -= h_step;
                    gg.log_scales[i][k]
                }
                "rotation" => {
                    let k = rng.random_range(0..4);
                    gp[i].rotation[k] += h_step;
                    gm[i].rotation[k] -= h_step;
                    gg.rotations[i][k]
                }
                "opacity" => {
                    gp[i].opacity_logit += h_step;
                    gm[i].opacity_logit -= h_step;
                    gg.opacity_logits[i]
                }
                "sh" => {
                    let c = rng.random_range(0..gs[i].sh.len());
                    let k = rng.random_range(0..3);
                    gp[i].sh[c][k] += h_step;
                    gm[i].sh[c][k] -= h_step;
                    gg.sh[i * gs[i].sh.len() + c][k]
                }
                _ => {
                    pp[i] += h_step;
                    pm[i] -= h_step;
                    gg.payload[i]
                }
            };
            let fd = (loss(&gp, &pp, sh_degree, &pose, &weights) - loss(&gm, &pm, sh_degree, &pose, &weights)) / (2.0 * h_step);
            out.push((class, analytic, fd));
        }
    }
    out
}
