use crate::{Error, Real, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamGroup<T> {
    pub lr: T,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamGroup<T> {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient was non-finite; nothing was touched.
    Rejected,
}

/// Bias-corrected Adam over named parameter groups sharing one step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub groups: Vec<AdamGroup<T>>,
    pub step: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    /// One group per `(len, lr)` pair.
    pub fn new(groups: &[(usize, T)]) -> Self {
        AdamState {
            groups: groups
                .iter()
                .map(|&(n, lr)| AdamGroup {
                    lr,
                    m: vec![T::zero(); n],
                    v: vec![T::zero(); n],
                })
                .collect(),
            step: 0,
            beta1: T::lit(BETA1),
            beta2: T::lit(BETA2),
            eps: T::lit(EPSILON),
        }
    }

    /// Updates every group in place. A non-finite gradient anywhere rejects
    /// the whole step.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<StepOutcome> {
        if params.len() != self.groups.len() || grads.len() != self.groups.len() {
            return Err(Error::invalid("parameter group count differs from optimizer state"));
        }
        for ((p, g), st) in params.iter().zip(grads).zip(&self.groups) {
            if p.len() != st.m.len() || g.len() != st.m.len() {
                return Err(Error::invalid("parameter/gradient length differs from optimizer state"));
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Ok(StepOutcome::Rejected);
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, g), st) in params.iter_mut().zip(grads).zip(self.groups.iter_mut()) {
            let lr = st.lr;
            for k in 0..p.len() {
                let gk = g[k];
                st.m[k] = b1 * st.m[k] + (T::one() - b1) * gk;
                st.v[k] = b2 * st.v[k] + (T::one() - b2) * gk * gk;
                let mh = st.m[k] / bc1;
                let vh = st.v[k] / bc2;
                p[k] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(StepOutcome::Applied)
    }

    /// Drops moment entries of removed elements. `keep` has one flag per
    /// element; each element spans `width` consecutive scalars.
    pub fn retain(&mut self, group: usize, keep: &[bool], width: usize) {
        let st = &mut self.groups[group];
        let mut k = 0;
        let (mut m, mut v) = (Vec::new(), Vec::new());
        for (e, &on) in keep.iter().enumerate() {
            if on {
                m.extend_from_slice(&st.m[e * width..(e + 1) * width]);
                v.extend_from_slice(&st.v[e * width..(e + 1) * width]);
            }
            k += width;
        }
        debug_assert_eq!(k, st.m.len());
        st.m = m;
        st.v = v;
    }
}
