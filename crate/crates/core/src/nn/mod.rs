//! Just enough neural network for the score and deformation fields:
//! positional encoding, batched ReLU MLPs with a hand-written reverse pass,
//! and Adam.

mod adam;
mod encoding;
mod mlp;

pub use adam::{AdamGroup, AdamState, StepOutcome, BETA1, BETA2, EPSILON};
pub use encoding::{encode_batch, encode_batch_backward, encoded_dim, positional_encoding};
pub use mlp::{mse, Init, Mlp, MlpCache, MlpSpec, OutputActivation};
