//! Tile-based Gaussian splatting: forward compositing, the matching reverse
//! pass, and a brute-force per-pixel reference renderer.
//!
//! Compositing is front to back in ascending camera-space center depth with
//! the Gaussian index as tie-break. A Gaussian touches a pixel only inside its
//! `sigma_cutoff` Mahalanobis footprint and only when its attenuated opacity
//! reaches `alpha_min`. The optional scalar payload is splatted with the same
//! weights as color: `S(p) = Σ sᵢ αᵢ' Tᵢ`, so an all-ones payload reproduces
//! the alpha image exactly.

mod backward;
mod forward;
mod preprocess;
mod reference;
mod snapshot;
mod weights;

pub use backward::{backprop_to_gaussians, render_backward, GaussianGrads, RenderGrads, SnapshotGrads};
pub use forward::render;
pub use reference::brute_force_render;
pub use snapshot::GaussianSnapshot;
pub use weights::{splat_weights, SplatWeights};

use ndarray::{Array2, Array3};

use crate::scene::SCREEN_BLUR;
use crate::Real;

pub const TILE_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions<T> {
    pub background: [T; 3],
    /// Splat the snapshot payload into [`RenderOutput::scalar`].
    pub payload: bool,
    /// Footprint radius in standard deviations.
    pub sigma_cutoff: T,
    /// Contributions with attenuated opacity below this are skipped.
    pub alpha_min: T,
    /// A pixel stops compositing once its transmittance drops below this.
    pub transmittance_min: T,
    /// Screen-space low-pass term (px²).
    pub blur: T,
}

impl<T: Real> Default for RenderOptions<T> {
    fn default() -> Self {
        RenderOptions {
            background: [T::zero(); 3],
            payload: false,
            sigma_cutoff: T::lit(3.0),
            alpha_min: T::lit(1.0 / 255.0),
            transmittance_min: T::lit(1e-6),
            blur: T::lit(SCREEN_BLUR),
        }
    }
}

impl<T: Real> RenderOptions<T> {
    pub fn with_background(mut self, bg: [T; 3]) -> Self {
        self.background = bg;
        self
    }

    pub fn with_payload(mut self, on: bool) -> Self {
        self.payload = on;
        self
    }

    /// Cutoffs pushed out of reach so the image is a smooth function of the
    /// parameters. Used by finite-difference checks.
    pub fn smooth() -> Self {
        RenderOptions {
            sigma_cutoff: T::lit(8.0),
            alpha_min: T::zero(),
            transmittance_min: T::zero(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub visible: usize,
    pub culled: usize,
    /// Gaussians dropped for a non-invertible screen covariance.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput<T> {
    /// `H × W × 3`
    pub color: Array3<T>,
    /// Accumulated opacity `Σ αᵢ' Tᵢ`, in `[0, 1]`.
    pub alpha: Array2<T>,
    /// Alpha-weighted depth `Σ zᵢ αᵢ' Tᵢ`; divide by `alpha` for the
    /// expected depth of the covered surface.
    pub depth: Array2<T>,
    pub scalar: Option<Array2<T>>,
    pub contrib_count: Array2<u32>,
    pub stats: RenderStats,
}

impl<T: Real> RenderOutput<T> {
    pub(crate) fn blank(height: usize, width: usize, bg: [T; 3], payload: bool) -> Self {
        let mut color = Array3::zeros((height, width, 3));
        for mut px in color.rows_mut() {
            px[0] = bg[0];
            px[1] = bg[1];
            px[2] = bg[2];
        }
        RenderOutput {
            color,
            alpha: Array2::zeros((height, width)),
            depth: Array2::zeros((height, width)),
            scalar: payload.then(|| Array2::zeros((height, width))),
            contrib_count: Array2::zeros((height, width)),
            stats: RenderStats::default(),
        }
    }

    /// Per-pixel expected depth (zero where nothing was hit).
    pub fn expected_depth(&self) -> Array2<T> {
        let mut d = self.depth.clone();
        d.zip_mut_with(&self.alpha, |d, &a| *d = if a > T::zero() { *d / a } else { T::zero() });
        d
    }
}
