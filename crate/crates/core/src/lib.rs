//! Hybrid static/dynamic 4D Gaussian scene engine.
//!
//! A scene is an explicit set of static Gaussians plus a set of canonical
//! dynamic Gaussians moved over time by a small deformation network. The
//! crate covers the geometry ([`scene`]), differentiable tile splatting
//! ([`raster`]), the small networks ([`nn`]), the deformation field
//! ([`dynamics`]), self-supervised static/dynamic splitting
//! ([`decomposition`]), the end-to-end optimizer ([`pipeline`]) and the
//! metrics and planning probe ([`evaluation`]).
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod nn;
pub mod pipeline;
pub mod raster;
pub mod real;
pub mod scene;
mod spatial;

pub use error::{Error, Result};
pub use real::{logit, sigmoid, Real};

pub type Gaussian = scene::Gaussian3D<f64>;
pub type Camera = scene::CameraPose<f64>;
pub type Bundle = scene::ReferenceBundle<f64>;
pub type Scene = scene::HybridScene<f64>;
pub type Snapshot = raster::GaussianSnapshot<f64>;
pub type Field = dynamics::DeformationField<f64>;
