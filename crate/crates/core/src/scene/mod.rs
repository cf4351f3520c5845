//! Domain types and the geometry shared by every other module: Gaussians,
//! cameras, spherical harmonics, reference bundles and the hybrid scene.

mod bundle;
mod camera;
mod gaussian;
pub mod linalg;
mod sh;

pub use bundle::{Frame, ReferenceBundle};
pub use camera::{
    ewa_2d, CameraPose, Intrinsics, PoseRecord, Projection, FAR_PLANE, NEAR_PLANE, SCREEN_BLUR,
};
pub use gaussian::{
    covariance_backward, covariance_from_rotation_scale, normalize_quat, packed_covariance,
    quat_to_rotation, rotation_backward, sh_degree_for_len, Gaussian3D, MAX_SCALE, MIN_SCALE,
};
pub use sh::{coeff_count, eval_sh, eval_sh_unchecked, rgb_to_dc, sh_basis, sh_basis_grad, COLOR_OFFSET, SH_C0};

use crate::dynamics::DeformationField;
use crate::{Error, Real, Result};

/// The persistent product: static Gaussians, canonical dynamic Gaussians and
/// the shared deformation network that moves them.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridScene<T> {
    pub static_gaussians: Vec<Gaussian3D<T>>,
    pub dynamic_gaussians: Vec<Gaussian3D<T>>,
    pub deformation: Option<DeformationField<T>>,
    /// Number of reference timesteps; valid times are `[0, num_frames - 1]`.
    pub num_frames: usize,
    pub scene_scale: T,
    pub scene_center: [T; 3],
    pub sh_degree: usize,
    pub feature_dim: usize,
}

impl<T: Real> HybridScene<T> {
    pub fn static_only(gaussians: Vec<Gaussian3D<T>>, num_frames: usize, scene_scale: T, scene_center: [T; 3], sh_degree: usize) -> Self {
        let feature_dim = gaussians.first().map(|g| g.feature.len()).unwrap_or(0);
        HybridScene {
            static_gaussians: gaussians,
            dynamic_gaussians: Vec::new(),
            deformation: None,
            num_frames,
            scene_scale,
            scene_center,
            sh_degree,
            feature_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.static_gaussians.len() + self.dynamic_gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time normalized to `[0, 1]` over the reference range.
    pub fn normalized_time(&self, t: T) -> T {
        if self.num_frames <= 1 {
            T::zero()
        } else {
            t / T::from_usize_lossy(self.num_frames - 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deformation.is_none() && !self.dynamic_gaussians.is_empty() {
            return Err(Error::invalid("dynamic Gaussians present without a deformation field"));
        }
        if !(self.scene_scale > T::zero()) || !self.scene_scale.is_finite() {
            return Err(Error::invalid("scene scale must be positive and finite"));
        }
        let n_sh = coeff_count(self.sh_degree);
        for g in self.static_gaussians.iter().chain(&self.dynamic_gaussians) {
            if g.sh.len() != n_sh {
                return Err(Error::invalid("Gaussian SH coefficient count does not match scene degree"));
            }
            if g.feature.len() != self.feature_dim {
                return Err(Error::invalid("Gaussian feature length does not match scene feature dimension"));
            }
        }
        Ok(())
    }
}
