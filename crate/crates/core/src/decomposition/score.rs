use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ErrorMapSet;
use crate::nn::{AdamState, Init, Mlp, MlpSpec, OutputActivation};
use crate::pipeline::ScoreConfig;
use crate::raster::{splat_weights, GaussianSnapshot, RenderOptions, SplatWeights};
use crate::scene::{CameraPose, Gaussian3D};
use crate::{Error, Real, Result};

const P_CLAMP: f64 = 1e-6;

/// Network input per Gaussian: normalized position then the feature vector.
pub fn score_inputs<T: Real>(gaussians: &[Gaussian3D<T>], center: [T; 3], scale: T) -> Result<Array2<T>> {
    let f = gaussians.first().map_or(0, |g| g.feature.len());
    let mut x = Array2::zeros((gaussians.len(), 3 + f));
    for (i, g) in gaussians.iter().enumerate() {
        if g.feature.len() != f {
            return Err(Error::invalid(format!("Gaussian {i} has {} features, expected {f}", g.feature.len())));
        }
        for k in 0..3 {
            x[[i, k]] = (g.position[k] - center[k]) / scale;
        }
        for k in 0..f {
            x[[i, 3 + k]] = g.feature[k];
        }
    }
    Ok(x)
}

pub fn score_net_spec(input_dim: usize, hidden_dims: &[usize]) -> MlpSpec {
    MlpSpec {
        input_dim,
        hidden_dims: hidden_dims.to_vec(),
        output_dim: 1,
        output_activation: OutputActivation::Sigmoid,
        init: Init::Xavier,
    }
}

/// Splat weights of one frame plus the supervised pixels:
/// `(pixel index into weights, alpha, target)`.
pub struct FrameSupervision<T> {
    pub weights: SplatWeights<T>,
    pub pixels: Vec<(usize, T, T)>,
}

/// Builds per-frame supervision from frozen geometry. Only pixels whose
/// alpha reaches `min_alpha` are kept; the prediction there is the
/// alpha-normalized splatted score.
pub fn build_supervision<T: Real>(
    snapshot: &GaussianSnapshot<T>,
    poses: &[&CameraPose<T>],
    maps: &ErrorMapSet<T>,
    opts: &RenderOptions<T>,
    config: &ScoreConfig,
) -> Result<Vec<FrameSupervision<T>>> {
    if poses.len() != maps.len() {
        return Err(Error::invalid("one error map per supervised frame required"));
    }
    let min_alpha = T::lit(config.min_alpha);
    poses
        .iter()
        .zip(&maps.normalized)
        .map(|(pose, map)| {
            let weights = splat_weights(snapshot, pose, opts, config.pixel_stride)?;
            let pixels = (0..weights.len())
                .filter_map(|k| {
                    let a = weights.alpha(k);
                    let (y, x) = weights.pixels[k];
                    (a >= min_alpha && a > T::zero()).then(|| (k, a, map[[y, x]]))
                })
                .collect();
            Ok(FrameSupervision { weights, pixels })
        })
        .collect()
}

/// Mean binary cross-entropy of splatted scores against soft targets, and
/// its gradient with respect to the per-Gaussian scores.
pub fn splatted_bce<T: Real>(scores: &[T], sup: &[FrameSupervision<T>]) -> (T, Vec<T>) {
    let lo = T::lit(P_CLAMP);
    let hi = T::one() - lo;
    let count: usize = sup.iter().map(|f| f.pixels.len()).sum();
    let mut grad = vec![T::zero(); scores.len()];
    if count == 0 {
        return (T::zero(), grad);
    }
    let n = T::from_usize_lossy(count);
    let mut loss = T::zero();
    for f in sup {
        for &(k, a, e) in &f.pixels {
            let raw = f.weights.splat(k, scores) / a;
            let p = raw.max(lo).min(hi);
            loss -= e * p.ln() + (T::one() - e) * (T::one() - p).ln();
            if raw <= lo || raw >= hi {
                continue;
            }
            let dp = (p - e) / (p * (T::one() - p) * n);
            for &(i, w) in f.weights.pixel(k) {
                grad[i as usize] += dp * w / a;
            }
        }
    }
    (loss / n, grad)
}

/// Loss and parameter gradient of the score network for fixed inputs.
pub fn score_loss_and_grad<T: Real>(mlp: &Mlp<T>, inputs: &Array2<T>, sup: &[FrameSupervision<T>]) -> Result<(T, Vec<T>)> {
    let cache = mlp.forward(inputs.view())?;
    let scores: Vec<T> = cache.output.column(0).to_vec();
    let (loss, ds) = splatted_bce(&scores, sup);
    let gout = Array2::from_shape_vec((ds.len(), 1), ds).map_err(|e| Error::invalid(e.to_string()))?;
    let (dparams, _) = mlp.backward(&cache, gout.view())?;
    Ok((loss, dparams))
}

pub struct ScoreField<T> {
    pub mlp: Mlp<T>,
    pub scores: Vec<T>,
    pub final_loss: T,
}

/// Fits the score network to the error-map supervision. Geometry is frozen;
/// only network parameters change.
pub fn train_score_field<T: Real>(
    gaussians: &[Gaussian3D<T>],
    center: [T; 3],
    scale: T,
    sup: &[FrameSupervision<T>],
    config: &ScoreConfig,
    lr: f64,
    seed: u64,
) -> Result<ScoreField<T>> {
    let inputs = score_inputs(gaussians, center, scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mlp = Mlp::new(score_net_spec(inputs.ncols(), &config.hidden_dims), &mut rng)?;
    let mut adam = AdamState::new(&[(mlp.params.len(), T::lit(lr))]);
    let mut final_loss = T::zero();
    for _ in 0..config.iters {
        let (loss, g) = score_loss_and_grad(&mlp, &inputs, sup)?;
        final_loss = loss;
        adam.step(&mut [&mut mlp.params], &[&g])?;
    }
    let scores = mlp.eval(inputs.view())?.column(0).to_vec();
    Ok(ScoreField { mlp, scores, final_loss })
}
