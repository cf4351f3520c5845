use std::time::Instant;

use ndarray::{Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use super::config::{LossWeights, PipelineConfig, PruneConfig};
use crate::dynamics::{apply_deformation_taped, compose_scene_at_t, deformation_backward};
use crate::evaluation::{l1, psnr, ssim, ssim_with_grad};
use crate::nn::{AdamState, StepOutcome};
use crate::raster::{backprop_to_gaussians, render, render_backward, GaussianGrads, GaussianSnapshot, RenderGrads, RenderOptions};
use crate::scene::{coeff_count, Gaussian3D, HybridScene, ReferenceBundle};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms<T> {
    pub total: T,
    pub l1: T,
    /// SSIM itself, not the loss `1 − SSIM`.
    pub ssim: T,
}

/// `λ₁·L1 + λ_s·(1 − SSIM)` and its gradient with respect to `pred`.
pub fn photometric_loss<T: Real>(pred: ArrayView3<T>, target: ArrayView3<T>, w: &LossWeights) -> Result<(LossTerms<T>, Array3<T>)> {
    let l = l1(pred, target)?;
    let n = T::from_usize_lossy(pred.len().max(1));
    let wl = T::lit(w.l1);
    let ws = T::lit(w.ssim);
    let mut grad = ndarray::Zip::from(&pred).and(&target).map_collect(|&p, &t| {
        let d = p - t;
        let s = if d > T::zero() {
            T::one()
        } else if d < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        wl * s / n
    });
    let s = if w.ssim != 0.0 {
        let (s, g) = ssim_with_grad(pred, target)?;
        grad.scaled_add(-ws, &g);
        s
    } else {
        ssim(pred, target)?
    };
    let total = wl * l + ws * (T::one() - s);
    Ok((LossTerms { total, l1: l, ssim: s }, grad))
}

pub(crate) fn render_options<T: Real>(background: [f64; 3]) -> RenderOptions<T> {
    RenderOptions::default().with_background(background.map(T::lit))
}

/// Mean PSNR of the scene rendered at the listed reference frames.
pub fn mean_psnr<T: Real>(scene: &HybridScene<T>, bundle: &ReferenceBundle<T>, frames: &[usize], background: [f64; 3]) -> Result<f64> {
    if frames.is_empty() {
        return Ok(f64::NAN);
    }
    let opts = render_options(background);
    let mut sum = 0.0;
    for &f in frames {
        let frame = &bundle.frames[f];
        let (snap, _) = compose_scene_at_t(scene, T::from_usize_lossy(f))?;
        let out = render(&snap, &frame.pose, &opts)?;
        sum += psnr(out.color.view(), frame.image.view())?;
    }
    Ok(sum / frames.len() as f64)
}

/// One line of the stage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: String,
    pub iterations: usize,
    /// Mean loss over the first and last (up to) 100 iterations.
    pub loss_first_window: f64,
    pub loss_last_window: f64,
    pub train_psnr: f64,
    pub static_count: usize,
    pub dynamic_count: usize,
    pub pruned: usize,
    pub rejected_steps: usize,
    /// Logged only, so reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_seconds: f64,
}

const GROUPS: usize = 6;

/// Round-robin photometric optimization of a hybrid scene: Gaussian
/// parameters of both sets plus the deformation network when present.
pub struct Trainer<'a, T: Real> {
    bundle: &'a ReferenceBundle<T>,
    frames: Vec<usize>,
    pub scene: HybridScene<T>,
    adam: AdamState<T>,
    weights: LossWeights,
    opts: RenderOptions<T>,
    prune: PruneConfig,
    pub iteration: usize,
    pub losses: Vec<f64>,
    pub pruned: usize,
    pub rejected: usize,
}

impl<'a, T: Real> Trainer<'a, T> {
    /// `frames` are the reference frames visited, in order.
    pub fn new(bundle: &'a ReferenceBundle<T>, frames: Vec<usize>, scene: HybridScene<T>, config: &PipelineConfig, prune: bool) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("no training frames"));
        }
        if let Some(&f) = frames.iter().find(|&&f| f >= bundle.len()) {
            return Err(Error::invalid(format!("training frame {f} out of range")));
        }
        scene.validate()?;
        let n = scene.len();
        let n_sh = coeff_count(scene.sh_degree);
        let lr = &config.learning_rates;
        let field_len = scene.deformation.as_ref().map_or(0, |f| f.mlp.params.len());
        let adam = AdamState::new(&[
            (3 * n, T::lit(lr.position) * scene.scene_scale),
            (4 * n, T::lit(lr.rotation)),
            (3 * n, T::lit(lr.log_scale)),
            (n, T::lit(lr.opacity)),
            (3 * n_sh * n, T::lit(lr.sh)),
            (field_len, T::lit(lr.deform_net)),
        ]);
        let mut prune_cfg = config.prune.clone();
        if !prune {
            prune_cfg.interval = 0;
        }
        Ok(Trainer {
            bundle,
            frames,
            scene,
            adam,
            weights: config.loss,
            opts: render_options(config.background),
            prune: prune_cfg,
            iteration: 0,
            losses: Vec::new(),
            pruned: 0,
            rejected: 0,
        })
    }

    /// One optimizer step on the next frame in round-robin order.
    pub fn step(&mut self) -> Result<LossTerms<T>> {
        let f = self.frames[self.iteration % self.frames.len()];
        let frame = &self.bundle.frames[f];
        let t = T::from_usize_lossy(f);
        let ns = self.scene.static_gaussians.len();
        let n_sh = coeff_count(self.scene.sh_degree);

        let mut snap = GaussianSnapshot::empty(self.scene.sh_degree);
        snap.reserve(self.scene.len());
        for g in &self.scene.static_gaussians {
            snap.push(g)?;
        }
        let set = match &self.scene.deformation {
            Some(field) if !self.scene.dynamic_gaussians.is_empty() => Some(apply_deformation_taped(&self.scene.dynamic_gaussians, field, t)?),
            _ => None,
        };
        match &set {
            Some(s) => s.gaussians.iter().try_for_each(|g| snap.push(g))?,
            None => self.scene.dynamic_gaussians.iter().try_for_each(|g| snap.push(g))?,
        }

        let out = render(&snap, &frame.pose, &self.opts)?;
        let (terms, dimg) = photometric_loss(out.color.view(), frame.image.view(), &self.weights)?;
        if !terms.total.is_finite() {
            return Err(Error::Diverged {
                iteration: self.iteration,
                detail: format!("loss {} on frame {f}", terms.total),
            });
        }
        let sg = render_backward(&snap, &frame.pose, &self.opts, &RenderGrads::color(dimg))?;
        let (gs, gd) = sg.split_at(ns, n_sh);
        let g_static = backprop_to_gaussians(&self.scene.static_gaussians, &gs)?;
        let (g_dyn, g_field) = match (&set, &self.scene.deformation) {
            (Some(s), Some(field)) => {
                let mut g = backprop_to_gaussians(&s.gaussians, &gd)?;
                let gf = deformation_backward(field, &self.scene.dynamic_gaussians, s, &mut g)?;
                (g, gf)
            }
            _ => (backprop_to_gaussians(&self.scene.dynamic_gaussians, &gd)?, Vec::new()),
        };

        let mut params = gather(self.scene.static_gaussians.iter().chain(&self.scene.dynamic_gaussians));
        let grads = gather_grads(&[&g_static, &g_dyn]);
        let mut field_params = self.scene.deformation.as_ref().map(|f| f.mlp.params.clone()).unwrap_or_default();
        let outcome = {
            let [p0, p1, p2, p3, p4] = &mut params;
            let mut refs: [&mut [T]; GROUPS] = [p0, p1, p2, p3, p4, &mut field_params];
            let grefs: [&[T]; GROUPS] = [&grads[0], &grads[1], &grads[2], &grads[3], &grads[4], &g_field];
            self.adam.step(&mut refs, &grefs)?
        };
        if outcome == StepOutcome::Rejected {
            self.rejected += 1;
        } else {
            scatter(&params, self.scene.static_gaussians.iter_mut().chain(self.scene.dynamic_gaussians.iter_mut()));
            if let Some(field) = self.scene.deformation.as_mut() {
                field.mlp.params = field_params;
            }
        }
        self.iteration += 1;
        self.losses.push(terms.total.as_f64());
        if self.prune.interval > 0 && self.iteration % self.prune.interval == 0 {
            self.prune_transparent();
        }
        Ok(terms)
    }

    pub fn run(&mut self, iters: usize) -> Result<()> {
        for _ in 0..iters {
            self.step()?;
        }
        Ok(())
    }

    /// Removes Gaussians whose opacity fell below the threshold.
    fn prune_transparent(&mut self) {
        let thr = T::lit(self.prune.opacity_threshold);
        let keep: Vec<bool> = self
            .scene
            .static_gaussians
            .iter()
            .chain(&self.scene.dynamic_gaussians)
            .map(|g| g.opacity() >= thr)
            .collect();
        let removed = keep.iter().filter(|k| !**k).count();
        if removed == 0 {
            return;
        }
        let n_sh = coeff_count(self.scene.sh_degree);
        for (group, width) in [(0, 3), (1, 4), (2, 3), (3, 1), (4, 3 * n_sh)] {
            self.adam.retain(group, &keep, width);
        }
        let mut k = keep.iter();
        self.scene.static_gaussians.retain(|_| *k.next().expect("flag per Gaussian"));
        self.scene.dynamic_gaussians.retain(|_| *k.next().expect("flag per Gaussian"));
        self.pruned += removed;
    }

    /// Runs `iters` steps and summarizes them.
    pub fn run_stage(&mut self, name: &str, iters: usize, background: [f64; 3]) -> Result<StageMetrics> {
        let start = Instant::now();
        let first = self.losses.len();
        self.run(iters)?;
        let window = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let stage = &self.losses[first..];
        let m = StageMetrics {
            stage: name.to_string(),
            iterations: iters,
            loss_first_window: window(&stage[..stage.len().min(100)]),
            loss_last_window: window(&stage[stage.len().saturating_sub(100)..]),
            train_psnr: mean_psnr(&self.scene, self.bundle, &self.frames, background)?,
            static_count: self.scene.static_gaussians.len(),
            dynamic_count: self.scene.dynamic_gaussians.len(),
            pruned: self.pruned,
            rejected_steps: self.rejected,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "stage={} iters={} loss={:.5} psnr={:.2} static={} dynamic={} pruned={} secs={:.1}",
            m.stage,
            m.iterations,
            m.loss_last_window,
            m.train_psnr,
            m.static_count,
            m.dynamic_count,
            m.pruned,
            m.wall_seconds
        );
        Ok(m)
    }
}

fn gather<'g, T: Real + 'g>(gs: impl Iterator<Item = &'g Gaussian3D<T>>) -> [Vec<T>; 5] {
    let mut out: [Vec<T>; 5] = Default::default();
    for g in gs {
        out[0].extend_from_slice(&g.position);
        out[1].extend_from_slice(&g.rotation);
        out[2].extend_from_slice(&g.log_scale);
        out[3].push(g.opacity_logit);
        out[4].extend(g.sh.iter().flatten());
    }
    out
}

fn gather_grads<T: Real>(parts: &[&GaussianGrads<T>]) -> [Vec<T>; 5] {
    let mut out: [Vec<T>; 5] = Default::default();
    for g in parts {
        out[0].extend(g.positions.iter().flatten());
        out[1].extend(g.rotations.iter().flatten());
        out[2].extend(g.log_scales.iter().flatten());
        out[3].extend_from_slice(&g.opacity_logits);
        out[4].extend(g.sh.iter().flatten());
    }
    out
}

fn scatter<'g, T: Real + 'g>(flat: &[Vec<T>; 5], gs: impl Iterator<Item = &'g mut Gaussian3D<T>>) {
    let mut sh_at = 0;
    for (i, g) in gs.enumerate() {
        g.position.copy_from_slice(&flat[0][3 * i..3 * i + 3]);
        g.rotation.copy_from_slice(&flat[1][4 * i..4 * i + 4]);
        g.log_scale.copy_from_slice(&flat[2][3 * i..3 * i + 3]);
        g.opacity_logit = flat[3][i];
        for c in g.sh.iter_mut() {
            c.copy_from_slice(&flat[4][sh_at..sh_at + 3]);
            sh_at += 3;
        }
        g.sanitize();
    }
}
