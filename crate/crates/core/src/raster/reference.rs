use super::preprocess::{project_one, splat_alpha, Splat};
use super::{GaussianSnapshot, RenderOptions, RenderOutput, RenderStats};
use crate::scene::CameraPose;
use crate::{Error, Real, Result};

/// Reference renderer: every pixel walks the full depth-sorted Gaussian list.
/// No tiling and no early termination; otherwise identical math to
/// [`super::render`].
pub fn brute_force_render<T: Real>(
    snapshot: &GaussianSnapshot<T>,
    pose: &CameraPose<T>,
    opts: &RenderOptions<T>,
) -> Result<RenderOutput<T>> {
    snapshot.validate()?;
    if opts.payload && snapshot.payload.is_none() {
        return Err(Error::invalid("payload rendering requested but snapshot has no payload"));
    }
    let mut stats = RenderStats::default();
    let mut splats: Vec<Splat<T>> = Vec::new();
    for i in 0..snapshot.len() {
        match project_one(snapshot, pose, opts, i) {
            Ok(s) => splats.push(s),
            Err(true) => stats.degenerate += 1,
            Err(false) => stats.culled += 1,
        }
    }
    splats.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));
    stats.visible = splats.len();

    let mut out = RenderOutput::blank(pose.height, pose.width, opts.background, opts.payload);
    out.stats = stats;
    let half = T::lit(0.5);
    for y in 0..pose.height {
        let py = T::from_usize_lossy(y) + half;
        for x in 0..pose.width {
            let px = T::from_usize_lossy(x) + half;
            let mut trans = T::one();
            let mut c = [T::zero(); 3];
            let (mut a, mut d, mut s) = (T::zero(), T::zero(), T::zero());
            let mut count = 0u32;
            for sp in &splats {
                let Some((alpha, _, _, _)) = splat_alpha(sp, px, py, opts) else {
                    continue;
                };
                let wgt = alpha * trans;
                c[0] += sp.color[0] * wgt;
                c[1] += sp.color[1] * wgt;
                c[2] += sp.color[2] * wgt;
                a += wgt;
                d += sp.depth * wgt;
                s += sp.payload * wgt;
                trans *= T::one() - alpha;
                count += 1;
            }
            if count == 0 {
                continue;
            }
            for ch in 0..3 {
                out.color[[y, x, ch]] = c[ch] + opts.background[ch] * trans;
            }
            out.alpha[[y, x]] = a.min(T::one());
            out.depth[[y, x]] = d;
            if let Some(sc) = out.scalar.as_mut() {
                sc[[y, x]] = s;
            }
            out.contrib_count[[y, x]] = count;
        }
    }
    Ok(out)
}
