//! Time-dependent Gaussians: a shared network maps `(position, t)` to
//! offsets `(δx, δr, δs)` that are added to the canonical dynamic Gaussians.
//! Opacity and color never change over time.

use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{encode_batch, encode_batch_backward, encoded_dim, AdamState, Init, Mlp, MlpCache, MlpSpec, OutputActivation};
use crate::raster::{GaussianGrads, GaussianSnapshot};
use crate::scene::{normalize_quat, Gaussian3D, HybridScene};
use crate::{Error, Real, Result};

pub const DEFORM_OUTPUTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeformConfig {
    pub hidden_dims: Vec<usize>,
    pub position_freqs: usize,
    pub time_freqs: usize,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            hidden_dims: vec![128; 4],
            position_freqs: 8,
            time_freqs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField<T> {
    pub mlp: Mlp<T>,
    pub position_freqs: usize,
    pub time_freqs: usize,
    pub scene_center: [T; 3],
    pub scene_scale: T,
    /// Reference frame count; time is fed as `t / (num_frames - 1)`.
    pub num_frames: usize,
}

/// Per-Gaussian offsets. `dx` is in world units.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation<T> {
    pub dx: Vec<[T; 3]>,
    pub dr: Vec<[T; 4]>,
    pub ds: Vec<[T; 3]>,
}

/// Forward state kept for [`DeformationField::backward`].
pub struct DeformTape<T> {
    normalized: Array2<T>,
    cache: MlpCache<T>,
}

impl<T: Real> DeformationField<T> {
    /// Zero-initialized final layer: the field starts as the identity.
    pub fn new<R: Rng>(config: &DeformConfig, scene_center: [T; 3], scene_scale: T, num_frames: usize, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec {
            input_dim: encoded_dim(3, config.position_freqs) + encoded_dim(1, config.time_freqs),
            hidden_dims: config.hidden_dims.clone(),
            output_dim: DEFORM_OUTPUTS,
            output_activation: OutputActivation::None,
            init: Init::ZeroLastLayer,
        };
        Ok(DeformationField {
            mlp: Mlp::new(spec, rng)?,
            position_freqs: config.position_freqs,
            time_freqs: config.time_freqs,
            scene_center,
            scene_scale,
            num_frames,
        })
    }

    pub fn normalized_time(&self, t: T) -> T {
        if self.num_frames <= 1 {
            T::zero()
        } else {
            t / T::from_usize_lossy(self.num_frames - 1)
        }
    }

    fn inputs(&self, positions: &[[T; 3]], t: T) -> Result<(Array2<T>, Array2<T>)> {
        let n = positions.len();
        let inv = T::one() / self.scene_scale;
        let mut normalized = Array2::zeros((n, 3));
        for (i, p) in positions.iter().enumerate() {
            for k in 0..3 {
                if !p[k].is_finite() {
                    return Err(Error::invalid(format!("non-finite position at index {i}")));
                }
                normalized[[i, k]] = (p[k] - self.scene_center[k]) * inv;
            }
        }
        if !t.is_finite() {
            return Err(Error::invalid("non-finite time"));
        }
        let pe_x = encode_batch(normalized.view(), self.position_freqs);
        let tn = Array2::from_elem((1, 1), self.normalized_time(t));
        let pe_t = encode_batch(tn.view(), self.time_freqs);
        let wx = pe_x.ncols();
        let mut input = Array2::zeros((n, wx + pe_t.ncols()));
        input.slice_mut(s![.., ..wx]).assign(&pe_x);
        for mut row in input.outer_iter_mut() {
            row.slice_mut(s![wx..]).assign(&pe_t.row(0));
        }
        Ok((normalized, input))
    }

    fn split(&self, out: &Array2<T>) -> Deformation<T> {
        let n = out.nrows();
        let mut d = Deformation {
            dx: Vec::with_capacity(n),
            dr: Vec::with_capacity(n),
            ds: Vec::with_capacity(n),
        };
        for row in out.outer_iter() {
            d.dx.push([row[0] * self.scene_scale, row[1] * self.scene_scale, row[2] * self.scene_scale]);
            d.dr.push([row[3], row[4], row[5], row[6]]);
            d.ds.push([row[7], row[8], row[9]]);
        }
        d
    }

    pub fn deform(&self, positions: &[[T; 3]], t: T) -> Result<Deformation<T>> {
        Ok(self.deform_taped(positions, t)?.0)
    }

    pub fn deform_taped(&self, positions: &[[T; 3]], t: T) -> Result<(Deformation<T>, DeformTape<T>)> {
        let (normalized, input) = self.inputs(positions, t)?;
        let cache = self.mlp.forward(input.view())?;
        let d = self.split(&cache.output);
        Ok((d, DeformTape { normalized, cache }))
    }

    /// Gradients w.r.t. the network parameters and the input positions,
    /// given gradients w.r.t. the offsets.
    pub fn backward(&self, tape: &DeformTape<T>, grad: &Deformation<T>) -> Result<(Vec<T>, Vec<[T; 3]>)> {
        let n = tape.normalized.nrows();
        if grad.dx.len() != n || grad.dr.len() != n || grad.ds.len() != n {
            return Err(Error::invalid("deformation gradient length differs from forward batch"));
        }
        let mut gout = Array2::zeros((n, DEFORM_OUTPUTS));
        for i in 0..n {
            for k in 0..3 {
                gout[[i, k]] = grad.dx[i][k] * self.scene_scale;
                gout[[i, 7 + k]] = grad.ds[i][k];
            }
            for k in 0..4 {
                gout[[i, 3 + k]] = grad.dr[i][k];
            }
        }
        let (dparams, dinput) = self.mlp.backward(&tape.cache, gout.view())?;
        let wx = encoded_dim(3, self.position_freqs);
        let dnorm = encode_batch_backward(tape.normalized.view(), self.position_freqs, dinput.slice(s![.., ..wx]));
        let inv = T::one() / self.scene_scale;
        let dpos = dnorm.outer_iter().map(|r| [r[0] * inv, r[1] * inv, r[2] * inv]).collect();
        Ok((dparams, dpos))
    }

    /// Regresses the field onto known position offsets: `targets[k][i]` is the
    /// desired `δx` of `positions[i]` at `times[k]`. Rotation and scale
    /// offsets are pulled toward zero. Returns the final mean squared error.
    pub fn fit_offsets(&mut self, positions: &[[T; 3]], times: &[T], targets: &[Vec<[T; 3]>], iters: usize, lr: T) -> Result<T> {
        if times.len() != targets.len() || targets.iter().any(|t| t.len() != positions.len()) {
            return Err(Error::invalid("offset targets do not match positions × times"));
        }
        let mut adam = AdamState::new(&[(self.mlp.params.len(), lr)]);
        let mut last = T::zero();
        for it in 0..iters {
            let k = it % times.len();
            let (d, tape) = self.deform_taped(positions, times[k])?;
            let n = T::from_usize_lossy(positions.len() * DEFORM_OUTPUTS);
            let two = T::lit(2.0);
            let mut loss = T::zero();
            let mut g = Deformation {
                dx: Vec::with_capacity(positions.len()),
                dr: d.dr.iter().map(|r| r.map(|v| two * v / n)).collect(),
                ds: d.ds.iter().map(|r| r.map(|v| two * v / n)).collect(),
            };
            for (i, dx) in d.dx.iter().enumerate() {
                let mut gi = [T::zero(); 3];
                for a in 0..3 {
                    // Regress in normalized units so the loss is scale-free.
                    let e = (dx[a] - targets[k][i][a]) / self.scene_scale;
                    loss += e * e;
                    gi[a] = two * e / (n * self.scene_scale);
                }
                g.dx.push(gi);
            }
            for v in d.dr.iter().flatten().chain(d.ds.iter().flatten()) {
                loss += *v * *v;
            }
            last = loss / n;
            let (dp, _) = self.backward(&tape, &g)?;
            adam.step(&mut [&mut self.mlp.params], &[&dp])?;
        }
        Ok(last)
    }
}

/// Canonical dynamic Gaussians moved to time `t`:
/// `x + δx`, `normalize(r + δr)`, `s + δs`; opacity and SH untouched.
pub fn apply_deformation<T: Real>(canonical: &[Gaussian3D<T>], field: &DeformationField<T>, t: T) -> Result<Vec<Gaussian3D<T>>> {
    let positions: Vec<[T; 3]> = canonical.iter().map(|g| g.position).collect();
    let d = field.deform(&positions, t)?;
    Ok(deformed(canonical, &d))
}

pub(crate) fn deformed<T: Real>(canonical: &[Gaussian3D<T>], d: &Deformation<T>) -> Vec<Gaussian3D<T>> {
    canonical
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut out = g.clone();
            for k in 0..3 {
                out.position[k] = g.position[k] + d.dx[i][k];
                out.log_scale[k] = g.log_scale[k] + d.ds[i][k];
            }
            let q = [
                g.rotation[0] + d.dr[i][0],
                g.rotation[1] + d.dr[i][1],
                g.rotation[2] + d.dr[i][2],
                g.rotation[3] + d.dr[i][3],
            ];
            out.rotation = normalize_quat(q);
            out
        })
        .collect()
}

/// Forward pass kept for [`deformation_backward`].
pub struct DeformedSet<T> {
    pub gaussians: Vec<Gaussian3D<T>>,
    pub offsets: Deformation<T>,
    pub tape: DeformTape<T>,
}

pub fn apply_deformation_taped<T: Real>(canonical: &[Gaussian3D<T>], field: &DeformationField<T>, t: T) -> Result<DeformedSet<T>> {
    let positions: Vec<[T; 3]> = canonical.iter().map(|g| g.position).collect();
    let (offsets, tape) = field.deform_taped(&positions, t)?;
    Ok(DeformedSet {
        gaussians: deformed(canonical, &offsets),
        offsets,
        tape,
    })
}

/// Turns gradients w.r.t. the deformed Gaussians (as returned by
/// [`backprop_to_gaussians`](crate::raster::backprop_to_gaussians) on
/// `set.gaussians`) into gradients w.r.t. the canonical Gaussians, in place,
/// and returns the field parameter gradient.
pub fn deformation_backward<T: Real>(
    field: &DeformationField<T>,
    canonical: &[Gaussian3D<T>],
    set: &DeformedSet<T>,
    grads: &mut GaussianGrads<T>,
) -> Result<Vec<T>> {
    let n = canonical.len();
    if grads.positions.len() != n || set.gaussians.len() != n {
        return Err(Error::invalid("deformation gradient count differs from Gaussian count"));
    }
    let mut g = Deformation {
        dx: grads.positions.clone(),
        dr: Vec::with_capacity(n),
        ds: grads.log_scales.clone(),
    };
    for (i, c) in canonical.iter().enumerate() {
        // The deformed rotation is q / |q| with q = r + δr. The incoming
        // gradient already carries the tangent projection at q / |q|, so only
        // the 1 / |q| factor is left.
        let q: [T; 4] = std::array::from_fn(|k| c.rotation[k] + set.offsets.dr[i][k]);
        let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        let inv = if norm > T::zero() { T::one() / norm } else { T::zero() };
        let dq = grads.rotations[i].map(|v| v * inv);
        grads.rotations[i] = dq;
        g.dr.push(dq);
    }
    let (dparams, dpos) = field.backward(&set.tape, &g)?;
    for (p, d) in grads.positions.iter_mut().zip(&dpos) {
        for k in 0..3 {
            p[k] += d[k];
        }
    }
    Ok(dparams)
}

/// Snapshot of the whole scene at time `t`: the static block verbatim, then
/// the dynamic block deformed to `t`. The flag reports extrapolation outside
/// the reference time range.
pub fn compose_scene_at_t<T: Real>(scene: &HybridScene<T>, t: T) -> Result<(GaussianSnapshot<T>, bool)> {
    let last = T::from_usize_lossy(scene.num_frames.saturating_sub(1));
    let extrapolated = t < T::zero() || t > last;
    let mut snap = GaussianSnapshot::empty(scene.sh_degree);
    snap.reserve(scene.len());
    for g in &scene.static_gaussians {
        snap.push(g)?;
    }
    if !scene.dynamic_gaussians.is_empty() {
        let field = scene
            .deformation
            .as_ref()
            .ok_or_else(|| Error::invalid("dynamic Gaussians without a deformation field"))?;
        for g in apply_deformation(&scene.dynamic_gaussians, field, t)? {
            snap.push(&g)?;
        }
    }
    Ok((snap, extrapolated))
}

/// Convenience for callers that only need the snapshot.
pub fn snapshot_at<T: Real>(scene: &HybridScene<T>, t: T) -> Result<GaussianSnapshot<T>> {
    Ok(compose_scene_at_t(scene, t)?.0)
}
