use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{sigmoid, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    None,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Xavier,
    /// Xavier hidden layers, final layer weights and biases exactly zero.
    ZeroLastLayer,
}

/// Fully connected ReLU network layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub output_activation: OutputActivation,
    pub init: Init,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("MLP dimensions must be at least 1"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Network parameters stored flat: per layer, `W` (out × in, row-major) then `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub spec: MlpSpec,
    pub params: Vec<T>,
}

/// Activations kept from a forward pass for the reverse pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// Input to every layer (the network input first).
    inputs: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T: Real> Mlp<T> {
    pub fn new<R: Rng>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers();
        let mut params = Vec::with_capacity(spec.param_count());
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let last = l + 1 == layers.len();
            if last && spec.init == Init::ZeroLastLayer {
                params.extend(std::iter::repeat_n(T::zero(), fan_in * fan_out + fan_out));
                continue;
            }
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(T::lit(rng.random_range(-bound..bound)));
            }
            params.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        Ok(Mlp { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::invalid(format!(
                "MLP expects {} parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Mlp { spec, params })
    }

    fn layer_views(&self) -> Vec<(ArrayView2<'_, T>, ArrayView1<'_, T>)> {
        let mut off = 0;
        self.spec
            .layers()
            .into_iter()
            .map(|(fi, fo)| {
                let w = ArrayView2::from_shape((fo, fi), &self.params[off..off + fi * fo]).unwrap();
                off += fi * fo;
                let b = ArrayView1::from(&self.params[off..off + fo]);
                off += fo;
                (w, b)
            })
            .collect()
    }

    /// Batched forward: `x` is `N × input_dim`.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<MlpCache<T>> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::invalid(format!(
                "MLP input width {} but spec expects {}",
                x.ncols(),
                self.spec.input_dim
            )));
        }
        let views = self.layer_views();
        let n_layers = views.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut act = x.to_owned();
        for (l, (w, b)) in views.into_iter().enumerate() {
            let mut z = act.dot(&w.t());
            z += &b;
            inputs.push(act);
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(T::zero()));
            } else if self.spec.output_activation == OutputActivation::Sigmoid {
                z.mapv_inplace(sigmoid);
            }
            act = z;
        }
        Ok(MlpCache { inputs, output: act })
    }

    pub fn eval(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        Ok(self.forward(x)?.output)
    }

    pub fn eval_one(&self, x: &[T]) -> Result<Vec<T>> {
        let xv = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.eval(xv)?.row(0).to_vec())
    }

    /// Reverse pass. Returns `(dL/dparams, dL/dx)`.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: ArrayView2<T>) -> Result<(Vec<T>, Array2<T>)> {
        if grad_out.dim() != cache.output.dim() {
            return Err(Error::invalid("output gradient shape differs from forward output"));
        }
        let views = self.layer_views();
        let n_layers = views.len();
        let mut dparams = vec![T::zero(); self.params.len()];
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for &(fi, fo) in &self.spec.layers() {
            offsets.push(off);
            off += fi * fo + fo;
        }

        let mut dz = grad_out.to_owned();
        if self.spec.output_activation == OutputActivation::Sigmoid {
            dz.zip_mut_with(&cache.output, |g, &y| *g = *g * y * (T::one() - y));
        }
        for l in (0..n_layers).rev() {
            let (w, _) = &views[l];
            let a = &cache.inputs[l];
            let (fo, fi) = w.dim();
            let dw = dz.t().dot(a);
            let db: Array1<T> = dz.sum_axis(Axis(0));
            let o = offsets[l];
            dparams[o..o + fi * fo].copy_from_slice(dw.as_standard_layout().as_slice().unwrap());
            dparams[o + fi * fo..o + fi * fo + fo].copy_from_slice(db.as_slice().unwrap());
            let mut da = dz.dot(w);
            if l > 0 {
                // `a` is the ReLU output of layer l-1.
                da.zip_mut_with(a, |g, &v| {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                });
            }
            dz = da;
        }
        Ok((dparams, dz))
    }

    /// Final layer weights and bias as a slice of `params`.
    pub fn last_layer_range(&self) -> std::ops::Range<usize> {
        let (fi, fo) = *self.spec.layers().last().unwrap();
        let n = self.params.len();
        n - (fi * fo + fo)..n
    }
}

/// Mean squared error and its gradient, for regression helpers.
pub fn mse<T: Real>(pred: ArrayView2<T>, target: ArrayView2<T>) -> (T, Array2<T>) {
    let n = T::from_usize_lossy(pred.len().max(1));
    let diff = &pred - &target;
    let loss = diff.iter().map(|v| *v * *v).sum::<T>() / n;
    (loss, diff.mapv(|v| T::lit(2.0) * v / n))
}
