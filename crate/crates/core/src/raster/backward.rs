use ndarray::{Array2, Array3};
use rayon::prelude::*;

use super::forward::tile_bounds;
use super::preprocess::{prepare, splat_alpha, Prepared};
use super::{GaussianSnapshot, RenderOptions};
use crate::scene::linalg::{mat3_mul, mat3_tvec, normalize3, norm3, sub3, sym3_grad_pack, sym3_unpack, transpose3, Mat3};
use crate::scene::{
    covariance_backward, sh_basis, sh_basis_grad, CameraPose, Gaussian3D, COLOR_OFFSET,
};
use crate::{Error, Real, Result};

/// Upstream gradient `dL/dRenderOutput`. Absent channels are treated as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGrads<T> {
    pub color: Option<Array3<T>>,
    pub alpha: Option<Array2<T>>,
    pub depth: Option<Array2<T>>,
    pub scalar: Option<Array2<T>>,
}

impl<T> Default for RenderGrads<T> {
    fn default() -> Self {
        RenderGrads {
            color: None,
            alpha: None,
            depth: None,
            scalar: None,
        }
    }
}

impl<T> RenderGrads<T> {
    pub fn color(g: Array3<T>) -> Self {
        RenderGrads {
            color: Some(g),
            ..Default::default()
        }
    }

    pub fn scalar(g: Array2<T>) -> Self {
        RenderGrads {
            scalar: Some(g),
            ..Default::default()
        }
    }
}

/// Gradients w.r.t. the activated snapshot quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGrads<T> {
    pub positions: Vec<[T; 3]>,
    /// Per packed entry `[xx, xy, xz, yy, yz, zz]`.
    pub covariances: Vec<[T; 6]>,
    /// W.r.t. post-sigmoid opacity.
    pub opacities: Vec<T>,
    pub sh: Vec<[T; 3]>,
    pub payload: Vec<T>,
}

impl<T: Real> SnapshotGrads<T> {
    /// Splits into the first `n` entries and the rest. `n_sh` is the SH
    /// coefficient count per entry.
    pub fn split_at(mut self, n: usize, n_sh: usize) -> (Self, Self) {
        let tail = SnapshotGrads {
            positions: self.positions.split_off(n),
            covariances: self.covariances.split_off(n),
            opacities: self.opacities.split_off(n),
            sh: self.sh.split_off(n * n_sh),
            payload: self.payload.split_off(n),
        };
        (self, tail)
    }

    fn zeros(n: usize, n_sh: usize) -> Self {
        SnapshotGrads {
            positions: vec![[T::zero(); 3]; n],
            covariances: vec![[T::zero(); 6]; n],
            opacities: vec![T::zero(); n],
            sh: vec![[T::zero(); 3]; n * n_sh],
            payload: vec![T::zero(); n],
        }
    }
}

/// Gradients w.r.t. the stored (unconstrained) Gaussian parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrads<T> {
    pub positions: Vec<[T; 3]>,
    /// W.r.t. the raw quaternion, including its normalization.
    pub rotations: Vec<[T; 4]>,
    pub log_scales: Vec<[T; 3]>,
    pub opacity_logits: Vec<T>,
    pub sh: Vec<[T; 3]>,
    pub payload: Vec<T>,
}

const N_SCREEN: usize = 11;
// Screen-space gradient slots accumulated per tile list entry.
const G_MX: usize = 0;
const G_MY: usize = 1;
const G_A: usize = 2;
const G_B: usize = 3;
const G_C: usize = 4;
const G_OP: usize = 5;
const G_COL: usize = 6;
const G_PAY: usize = 9;
const G_Z: usize = 10;

fn check_shape<T>(name: &str, shape: &[usize], want: &[usize]) -> Result<()> {
    if shape != want {
        return Err(Error::invalid(format!(
            "upstream {name} gradient has shape {shape:?}, expected {want:?}"
        )));
    }
    Ok(())
}

/// Reverse pass of [`super::render`] for the same inputs.
pub fn render_backward<T: Real>(
    snapshot: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
    upstream: &RenderGrads<T>,
) -> Result<SnapshotGrads<T>> {
    snapshot.validate()?;
    let (w, h) = (pose.width, pose.height);
    if let Some(g) = &upstream.color {
        check_shape::<T>("color", g.shape(), &[h, w, 3])?;
    }
    for (name, g) in [("alpha", &upstream.alpha), ("depth", &upstream.depth), ("scalar", &upstream.scalar)] {
        if let Some(g) = g {
            check_shape::<T>(name, g.shape(), &[h, w])?;
        }
    }
    if upstream.scalar.is_some() && snapshot.payload.is_none() {
        return Err(Error::invalid("scalar gradient supplied but snapshot has no payload"));
    }

    let n_sh = crate::scene::coeff_count(snapshot.sh_degree);
    let prep = prepare(snapshot, pose, opts);
    let tile_grads: Vec<Vec<[T; N_SCREEN]>> = (0..prep.tiles.len())
        .into_par_iter()
        .map(|t| backward_tile(&prep, t, w, h, opts, upstream))
        .collect();

    // Fixed merge order: tile by tile, list order within a tile.
    let mut screen = vec![[T::zero(); N_SCREEN]; prep.splats.len()];
    for (t, grads) in tile_grads.iter().enumerate() {
        for (&k, g) in prep.tiles[t].iter().zip(grads) {
            let acc = &mut screen[k as usize];
            for q in 0..N_SCREEN {
                acc[q] += g[q];
            }
        }
    }

    let per_splat: Vec<(usize, [T; 3], [T; 6], T, Vec<[T; 3]>, T)> = prep
        .splats
        .par_iter()
        .zip(screen.par_iter())
        .map(|(s, g)| {
            let (dpos, dcov, dsh) = splat_to_world(snapshot, pose, opts, s.index, g);
            (s.index, dpos, dcov, g[G_OP], dsh, g[G_PAY])
        })
        .collect();

    let mut out = SnapshotGrads::zeros(snapshot.len(), n_sh);
    for (i, dpos, dcov, dop, dsh, dpay) in per_splat {
        out.positions[i] = dpos;
        out.covariances[i] = dcov;
        out.opacities[i] = dop;
        out.sh[i * n_sh..(i + 1) * n_sh].copy_from_slice(&dsh);
        out.payload[i] = dpay;
    }
    Ok(out)
}

struct Contribution<T> {
    pos: usize,
    alpha: T,
    trans: T,
    gauss: T,
    dx: T,
    dy: T,
}

fn backward_tile<T: Real>(
    prep: &Prepared<T>,
    tile: usize,
    w: usize,
    h: usize,
    opts: &RenderOptions<T>,
    up: &RenderGrads<T>,
) -> Vec<[T; N_SCREEN]> {
    let list = &prep.tiles[tile];
    let mut grads = vec![[T::zero(); N_SCREEN]; list.len()];
    if list.is_empty() {
        return grads;
    }
    let (x0, x1, y0, y1) = tile_bounds(tile, prep.tiles_x, w, h);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut contribs: Vec<Contribution<T>> = Vec::with_capacity(list.len());
    for y in y0..y1 {
        let py = T::from_usize_lossy(y) + half;
        for x in x0..x1 {
            let gc = up
                .color
                .as_ref()
                .map_or([T::zero(); 3], |g| [g[[y, x, 0]], g[[y, x, 1]], g[[y, x, 2]]]);
            let ga = up.alpha.as_ref().map_or(T::zero(), |g| g[[y, x]]);
            let gd = up.depth.as_ref().map_or(T::zero(), |g| g[[y, x]]);
            let gp = up.scalar.as_ref().map_or(T::zero(), |g| g[[y, x]]);
            if gc.iter().all(|v| v.is_zero()) && ga.is_zero() && gd.is_zero() && gp.is_zero() {
                continue;
            }
            let px = T::from_usize_lossy(x) + half;

            // Replay the forward pass for this pixel.
            contribs.clear();
            let mut trans = T::one();
            for (pos, &k) in list.iter().enumerate() {
                let sp = &prep.splats[k as usize];
                let Some((alpha, gauss, dx, dy)) = splat_alpha(sp, px, py, opts) else {
                    continue;
                };
                contribs.push(Contribution {
                    pos,
                    alpha,
                    trans,
                    gauss,
                    dx,
                    dy,
                });
                trans *= T::one() - alpha;
                if trans < opts.transmittance_min {
                    break;
                }
            }
            if contribs.is_empty() {
                continue;
            }

            // Suffix recurrences: what lies behind contribution i, per unit
            // transmittance in front of it.
            let mut rc = opts.background;
            let (mut ra, mut rd, mut rp) = (T::zero(), T::zero(), T::zero());
            for c in contribs.iter().rev() {
                let sp = &prep.splats[list[c.pos] as usize];
                let wgt = c.alpha * c.trans;
                let g = &mut grads[c.pos];
                for ch in 0..3 {
                    g[G_COL + ch] += wgt * gc[ch];
                }
                g[G_PAY] += wgt * gp;
                g[G_Z] += wgt * gd;
                let mut dalpha = ga * (T::one() - ra) + gp * (sp.payload - rp) + gd * (sp.depth - rd);
                for ch in 0..3 {
                    dalpha += gc[ch] * (sp.color[ch] - rc[ch]);
                }
                dalpha *= c.trans;
                let keep = T::one() - c.alpha;
                for ch in 0..3 {
                    rc[ch] = sp.color[ch] * c.alpha + keep * rc[ch];
                }
                ra = c.alpha + keep * ra;
                rd = sp.depth * c.alpha + keep * rd;
                rp = sp.payload * c.alpha + keep * rp;

                g[G_OP] += c.gauss * dalpha;
                let dm = T::lit(-0.5) * c.alpha * dalpha;
                let [ca, cb, cc] = sp.conic;
                g[G_MX] += dm * (-two * (ca * c.dx + cb * c.dy));
                g[G_MY] += dm * (-two * (cb * c.dx + cc * c.dy));
                g[G_A] += dm * c.dx * c.dx;
                g[G_B] += dm * two * c.dx * c.dy;
                g[G_C] += dm * c.dy * c.dy;
            }
        }
    }
    grads
}

/// Chains screen-space gradients of one splat back to its world position,
/// packed 3D covariance and SH coefficients.
fn splat_to_world<T: Real>(
    snap: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
    i: usize,
    g: &[T; N_SCREEN],
) -> ([T; 3], [T; 6], Vec<[T; 3]>) {
    let x = snap.positions[i];
    let p = pose.to_camera(x);
    let (px, py, z) = (p[0], p[1], p[2]);
    let iz = T::one() / z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let two = T::lit(2.0);
    let j = pose.projection_jacobian(p);
    let cov = sym3_unpack(&snap.covariances[i]);
    let sc = mat3_mul(&mat3_mul(&pose.rotation, &cov), &transpose3(&pose.rotation));
    let c2 = crate::scene::ewa_2d(&j, &sc, opts.blur);
    let (a, b, c) = (c2[0][0], c2[0][1], c2[1][1]);
    let det = a * c - b * b;
    let inv = T::one() / det;
    let k = [[c * inv, -b * inv], [-b * inv, a * inv]];

    // conic → screen covariance: dΣ2 = -K Gk K.
    let half = T::lit(0.5);
    let gk = [[g[G_A], g[G_B] * half], [g[G_B] * half, g[G_C]]];
    let mut kg = [[T::zero(); 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            kg[r][s] = k[r][0] * gk[0][s] + k[r][1] * gk[1][s];
        }
    }
    let mut g2 = [[T::zero(); 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            g2[r][s] = -(kg[r][0] * k[0][s] + kg[r][1] * k[1][s]);
        }
    }

    // Σ2 = J Σc Jᵀ + blur: dΣc = Jᵀ G2 J, dJ = 2 G2 J Σc.
    let mut dsc: Mat3<T> = [[T::zero(); 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            let mut acc = T::zero();
            for u in 0..2 {
                for v in 0..2 {
                    acc += j[u][r] * g2[u][v] * j[v][s];
                }
            }
            dsc[r][s] = acc;
        }
    }
    let mut jsc = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for s in 0..3 {
            jsc[r][s] = j[r][0] * sc[0][s] + j[r][1] * sc[1][s] + j[r][2] * sc[2][s];
        }
    }
    let mut dj = [[T::zero(); 3]; 2];
    for r in 0..2 {
        for s in 0..3 {
            dj[r][s] = two * (g2[r][0] * jsc[0][s] + g2[r][1] * jsc[1][s]);
        }
    }
    let dcov_full = mat3_mul(&mat3_mul(&transpose3(&pose.rotation), &dsc), &pose.rotation);
    let dcov = sym3_grad_pack(&dcov_full);

    // Camera-space point: through J, the projected mean and the depth output.
    let (fx, fy) = (pose.fx, pose.fy);
    let mut dp = [T::zero(); 3];
    dp[0] = dj[0][2] * (-fx * iz2) + g[G_MX] * fx * iz;
    dp[1] = dj[1][2] * (-fy * iz2) + g[G_MY] * fy * iz;
    dp[2] = dj[0][0] * (-fx * iz2)
        + dj[0][2] * (two * fx * px * iz3)
        + dj[1][1] * (-fy * iz2)
        + dj[1][2] * (two * fy * py * iz3)
        + g[G_MX] * (-fx * px * iz2)
        + g[G_MY] * (-fy * py * iz2)
        + g[G_Z];
    let mut dpos = mat3_tvec(&pose.rotation, dp);

    // Color: rgb = max(0, Σ Y_k(d) c_k + 0.5), d = normalize(x - center).
    let n_sh = crate::scene::coeff_count(snap.sh_degree);
    let coeffs = snap.sh_of(i);
    let v = sub3(x, pose.center());
    let dir = normalize3(v);
    let mut basis = [T::zero(); 16];
    sh_basis(snap.sh_degree, dir, &mut basis);
    let mut raw = [T::lit(COLOR_OFFSET); 3];
    for (bk, ck) in basis.iter().zip(coeffs) {
        for ch in 0..3 {
            raw[ch] += *bk * ck[ch];
        }
    }
    let mut drgb = [g[G_COL], g[G_COL + 1], g[G_COL + 2]];
    for ch in 0..3 {
        if raw[ch] < T::zero() {
            drgb[ch] = T::zero();
        }
    }
    let mut dsh = vec![[T::zero(); 3]; n_sh];
    for kk in 0..n_sh {
        for ch in 0..3 {
            dsh[kk][ch] = basis[kk] * drgb[ch];
        }
    }
    if snap.sh_degree > 0 {
        let mut bgrad = [[T::zero(); 3]; 16];
        sh_basis_grad(snap.sh_degree, dir, &mut bgrad);
        let mut ddir = [T::zero(); 3];
        for kk in 1..n_sh {
            let w = coeffs[kk][0] * drgb[0] + coeffs[kk][1] * drgb[1] + coeffs[kk][2] * drgb[2];
            for ax in 0..3 {
                ddir[ax] += w * bgrad[kk][ax];
            }
        }
        let len = norm3(v);
        let proj = ddir[0] * dir[0] + ddir[1] * dir[1] + ddir[2] * dir[2];
        for ax in 0..3 {
            dpos[ax] += (ddir[ax] - dir[ax] * proj) / len;
        }
    }
    (dpos, dcov, dsh)
}

/// Chains snapshot gradients back to the stored parameters of the Gaussians
/// the snapshot was built from (same order).
pub fn backprop_to_gaussians<T: Real>(gaussians: &[Gaussian3D<T>], grads: &SnapshotGrads<T>) -> Result<GaussianGrads<T>> {
    if gaussians.len() != grads.positions.len() {
        return Err(Error::invalid("gradient count differs from Gaussian count"));
    }
    let parts: Vec<([T; 4], [T; 3], T)> = gaussians
        .par_iter()
        .zip(grads.covariances.par_iter())
        .zip(grads.opacities.par_iter())
        .map(|((g, dcov), &dop)| {
            let (dq, ds) = covariance_backward(g.rotation, g.log_scale, dcov);
            let o = g.opacity();
            (dq, ds, dop * o * (T::one() - o))
        })
        .collect();
    let mut out = GaussianGrads {
        positions: grads.positions.clone(),
        rotations: Vec::with_capacity(parts.len()),
        log_scales: Vec::with_capacity(parts.len()),
        opacity_logits: Vec::with_capacity(parts.len()),
        sh: grads.sh.clone(),
        payload: grads.payload.clone(),
    };
    for (dq, ds, dl) in parts {
        out.rotations.push(dq);
        out.log_scales.push(ds);
        out.opacity_logits.push(dl);
    }
    Ok(out)
}
