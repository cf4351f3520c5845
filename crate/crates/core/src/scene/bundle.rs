use ndarray::{Array2, Array3};

use super::camera::CameraPose;
use crate::{Error, Real, Result};

/// One posed reference frame with pixel-aligned geometry and features.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    /// `H × W × 3`, values in `[0, 1]`.
    pub image: Array3<T>,
    pub pose: CameraPose<T>,
    /// `H × W × 3` world-space points; entries outside `valid` are NaN.
    pub pointmap: Array3<T>,
    pub valid: Array2<bool>,
    /// `H × W × F`.
    pub featmap: Array3<T>,
    /// Ground-truth dynamic pixels (evaluation only).
    pub dyn_mask: Option<Array2<bool>>,
}

impl<T: Real> Frame<T> {
    pub fn height(&self) -> usize {
        self.image.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn point(&self, row: usize, col: usize) -> Option<[T; 3]> {
        self.valid[[row, col]].then(|| {
            [
                self.pointmap[[row, col, 0]],
                self.pointmap[[row, col, 1]],
                self.pointmap[[row, col, 2]],
            ]
        })
    }
}

/// Time-ordered reference frames. Frame `i` carries timestamp `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBundle<T> {
    pub frames: Vec<Frame<T>>,
    pub feature_dim: usize,
    /// Set when feature maps were synthesized from RGB because none were supplied.
    pub features_fallback: bool,
    pub scene_scale_hint: Option<f64>,
}

impl<T: Real> ReferenceBundle<T> {
    pub fn new(frames: Vec<Frame<T>>, feature_dim: usize) -> Result<Self> {
        let b = ReferenceBundle {
            frames,
            feature_dim,
            features_fallback: false,
            scene_scale_hint: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames.first().map(|f| (f.height(), f.width())).unwrap_or((0, 0))
    }

    pub fn has_masks(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.dyn_mask.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.dims();
        for (i, f) in self.frames.iter().enumerate() {
            let bad = |what: &str| Err(Error::invalid(format!("frame {i}: {what}")));
            if f.image.shape() != [h, w, 3] {
                return bad("image shape differs from frame 0");
            }
            if f.pose.width != w || f.pose.height != h {
                return bad("pose image size does not match the image");
            }
            if f.pose.timestamp != i {
                return bad(&format!("timestamp {} but expected {i}", f.pose.timestamp));
            }
            if f.pointmap.shape() != [h, w, 3] || f.valid.shape() != [h, w] {
                return bad("pointmap shape mismatch");
            }
            if f.featmap.shape() != [h, w, self.feature_dim] {
                return bad("feature map shape mismatch");
            }
            if let Some(m) = &f.dyn_mask {
                if m.shape() != [h, w] {
                    return bad("dynamic mask shape mismatch");
                }
            }
            for ((r, c), &ok) in f.valid.indexed_iter() {
                if ok && (0..3).any(|k| !f.pointmap[[r, c, k]].is_finite()) {
                    return bad(&format!("non-finite point at ({r}, {c}) inside the validity mask"));
                }
            }
            f.pose.validate().map_err(|e| Error::invalid(format!("frame {i}: {e}")))?;
        }
        Ok(())
    }
}
