//! Bundle directory reader and writer.
//!
//! ```text
//! frames/%04d.png      8-bit RGB
//! pointmaps/%04d.pfm   3-channel float, NaN = no geometry
//! featmaps/%04d.pfm    1-channel float, W × (H·F), channel planes stacked
//! masks/%04d.png       optional 8-bit gray, 0 or 255
//! poses.json           [{fx, fy, cx, cy, width, height, world_to_cam, t}]
//! meta.json            {format_version, feature_dim, scene_scale_hint, ...}
//! ```

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use hybrid_splat::scene::{CameraPose, Frame, PoseRecord, ReferenceBundle};
use hybrid_splat::{Bundle, Error, Result};
use image::{GrayImage, ImageFormat, RgbImage};
use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::feature_map;
use crate::pfm;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    pub format_version: u32,
    pub feature_dim: usize,
    #[serde(default)]
    pub scene_scale_hint: Option<f64>,
    #[serde(default)]
    pub features_fallback: bool,
}

pub fn frame_name(i: usize, ext: &str) -> String {
    format!("{i:04}.{ext}")
}

/// Unreadable bundle files are input defects, not runtime failures.
fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn encode_png(img: impl Into<image::DynamicImage>, path: &Path) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.into()
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    Ok(buf.into_inner())
}

/// Nearest 8-bit level.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `bundle` into `dir`. The bundle is staged in a sibling temporary
/// directory and renamed into place; an existing `dir` is replaced only when
/// it already holds a bundle (`meta.json`).
pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    if dir.exists() && !dir.join("meta.json").is_file() {
        return Err(Error::invalid(format!(
            "{} exists and is not a bundle directory; refusing to replace it",
            dir.display()
        )));
    }
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = dir
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no directory name", dir.display())))?
        .to_string_lossy();
    let tmp = parent.join(format!(".{name}.tmp{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    let staged = stage(bundle, &tmp);
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

fn stage(bundle: &Bundle, root: &Path) -> Result<()> {
    let masks = bundle.has_masks();
    let feats = !bundle.features_fallback;
    let mut subdirs = vec!["frames", "pointmaps"];
    if feats {
        subdirs.push("featmaps");
    }
    if masks {
        subdirs.push("masks");
    }
    for d in &subdirs {
        let p = root.join(d);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    bundle.frames.par_iter().enumerate().try_for_each(|(i, f)| -> Result<()> {
        let (h, w) = (f.height(), f.width());
        let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let (r, c) = (y as usize, x as usize);
            image::Rgb([to_u8(f.image[[r, c, 0]]), to_u8(f.image[[r, c, 1]]), to_u8(f.image[[r, c, 2]])])
        });
        let p = root.join("frames").join(frame_name(i, "png"));
        write(&p, &encode_png(img, &p)?)?;

        let pm = Array3::from_shape_fn((h, w, 3), |(r, c, k)| if f.valid[[r, c]] { f.pointmap[[r, c, k]] as f32 } else { f32::NAN });
        write(&root.join("pointmaps").join(frame_name(i, "pfm")), &pfm::encode(&pm)?)?;

        if feats {
            let fd = bundle.feature_dim;
            let planes = Array3::from_shape_fn((h * fd, w, 1), |(r, c, _)| f.featmap[[r % h, c, r / h]] as f32);
            write(&root.join("featmaps").join(frame_name(i, "pfm")), &pfm::encode(&planes)?)?;
        }
        if let (true, Some(m)) = (masks, &f.dyn_mask) {
            let img = GrayImage::from_fn(w as u32, h as u32, |x, y| image::Luma([if m[[y as usize, x as usize]] { 255 } else { 0 }]));
            let p = root.join("masks").join(frame_name(i, "png"));
            write(&p, &encode_png(img, &p)?)?;
        }
        Ok(())
    })?;
    let poses: Vec<PoseRecord> = bundle.frames.iter().enumerate().map(|(i, f)| PoseRecord::from_pose(&f.pose, i as f64)).collect();
    write(&root.join("poses.json"), serde_json::to_string_pretty(&poses)?.as_bytes())?;
    let meta = BundleMeta {
        format_version: BUNDLE_FORMAT_VERSION,
        feature_dim: bundle.feature_dim,
        scene_scale_hint: bundle.scene_scale_hint,
        features_fallback: bundle.features_fallback,
    };
    write(&root.join("meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())
}

fn frame_indices(dir: &Path, ext: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let listing = fs::read_dir(dir).map_err(|e| Error::invalid(format!("{}: {e}", dir.display())))?;
    for entry in listing {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(&format!(".{ext}")) {
            if let Ok(i) = stem.parse::<usize>() {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Checks that `dir` holds exactly frames `0..n`.
fn check_frame_set(dir: &Path, ext: &str, n: usize, what: &str) -> Result<()> {
    let found = frame_indices(dir, ext)?;
    for i in 0..n {
        if found.binary_search(&i).is_err() {
            return Err(Error::invalid(format!(
                "frame {i}: {what} {} missing (poses.json lists {n} frames)",
                dir.join(frame_name(i, ext)).display()
            )));
        }
    }
    if let Some(&extra) = found.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!(
            "frame {extra}: {what} present but poses.json lists only {n} frames"
        )));
    }
    Ok(())
}

fn decode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

fn load_frame(root: &Path, i: usize, rec: &PoseRecord, meta: &BundleMeta, feats: bool, masks: bool) -> Result<Frame<f64>> {
    let ctx = |e: Error| Error::invalid(format!("frame {i}: {e}"));
    if rec.t != i as f64 {
        return Err(Error::invalid(format!("frame {i}: pose time {} must equal the frame index", rec.t)));
    }
    let pose: CameraPose<f64> = rec.to_pose().map_err(ctx)?;
    let (h, w) = (pose.height, pose.width);

    let p = root.join("frames").join(frame_name(i, "png"));
    let img = image::load_from_memory_with_format(&read(&p)?, ImageFormat::Png)
        .map_err(|e| decode_err(&p, e))?
        .to_rgb8();
    if (img.height() as usize, img.width() as usize) != (h, w) {
        return Err(Error::invalid(format!(
            "frame {i}: image is {}×{} but the pose says {w}×{h}",
            img.width(),
            img.height()
        )));
    }
    let image = Array3::from_shape_fn((h, w, 3), |(r, c, k)| img.get_pixel(c as u32, r as u32)[k] as f64 / 255.0);

    let p = root.join("pointmaps").join(frame_name(i, "pfm"));
    let pm = pfm::decode(&read(&p)?).map_err(|e| decode_err(&p, e))?;
    if pm.dim() != (h, w, 3) {
        return Err(Error::invalid(format!("frame {i}: pointmap shape {:?} differs from image {h}×{w}×3", pm.dim())));
    }
    let mut valid = Array2::from_elem((h, w), false);
    for r in 0..h {
        for c in 0..w {
            let v = [pm[[r, c, 0]], pm[[r, c, 1]], pm[[r, c, 2]]];
            if v.iter().all(|x| x.is_nan()) {
                continue;
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("frame {i}: non-finite pointmap value at ({r}, {c})")));
            }
            valid[[r, c]] = true;
        }
    }
    let pointmap = pm.mapv(|v| v as f64);

    let fd = meta.feature_dim;
    let featmap = if feats {
        let p = root.join("featmaps").join(frame_name(i, "pfm"));
        let planes = pfm::decode(&read(&p)?).map_err(|e| decode_err(&p, e))?;
        if planes.dim() != (h * fd, w, 1) {
            return Err(Error::invalid(format!(
                "frame {i}: feature map is {:?}, expected {}×{w}×1 for {fd} channels",
                planes.dim(),
                h * fd
            )));
        }
        if planes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("frame {i}: non-finite feature value")));
        }
        Array3::from_shape_fn((h, w, fd), |(r, c, k)| planes[[k * h + r, c, 0]] as f64)
    } else {
        feature_map(&image, None, fd)
    };

    let dyn_mask = if masks {
        let p = root.join("masks").join(frame_name(i, "png"));
        let m = image::load_from_memory_with_format(&read(&p)?, ImageFormat::Png)
            .map_err(|e| decode_err(&p, e))?
            .to_luma8();
        if (m.height() as usize, m.width() as usize) != (h, w) {
            return Err(Error::invalid(format!("frame {i}: mask size differs from the image")));
        }
        if let Some(v) = m.pixels().map(|p| p[0]).find(|v| *v != 0 && *v != 255) {
            return Err(Error::invalid(format!("frame {i}: mask value {v} is neither 0 nor 255")));
        }
        Some(Array2::from_shape_fn((h, w), |(r, c)| m.get_pixel(c as u32, r as u32)[0] == 255))
    } else {
        None
    };

    Ok(Frame {
        image,
        pose,
        pointmap,
        valid,
        featmap,
        dyn_mask,
    })
}

/// Reads and validates a bundle directory.
pub fn ingest_bundle(dir: &Path) -> Result<Bundle> {
    let p = dir.join("meta.json");
    let meta: BundleMeta = serde_json::from_slice(&read(&p)?).map_err(|e| decode_err(&p, e))?;
    if meta.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "bundle format version {} is not supported (expected {BUNDLE_FORMAT_VERSION})",
            meta.format_version
        )));
    }
    if meta.feature_dim == 0 {
        return Err(Error::invalid("meta.json: feature_dim must be positive"));
    }
    let p = dir.join("poses.json");
    let poses: Vec<PoseRecord> = serde_json::from_slice(&read(&p)?).map_err(|e| decode_err(&p, e))?;
    let n = poses.len();
    if n == 0 {
        return Err(Error::invalid("poses.json lists no frames"));
    }
    check_frame_set(&dir.join("frames"), "png", n, "image")?;
    check_frame_set(&dir.join("pointmaps"), "pfm", n, "pointmap")?;
    let feats = dir.join("featmaps").is_dir();
    if feats {
        check_frame_set(&dir.join("featmaps"), "pfm", n, "feature map")?;
    } else if meta.feature_dim < crate::spec::BASE_FEATURES {
        return Err(Error::invalid(format!(
            "no featmaps/ and feature_dim {} is too small for fallback features",
            meta.feature_dim
        )));
    }
    let masks = dir.join("masks").is_dir();
    if masks {
        check_frame_set(&dir.join("masks"), "png", n, "mask")?;
    }
    let frames = poses
        .par_iter()
        .enumerate()
        .map(|(i, rec)| load_frame(dir, i, rec, &meta, feats, masks))
        .collect::<Result<Vec<_>>>()?;
    let mut bundle = ReferenceBundle::new(frames, meta.feature_dim)?;
    bundle.features_fallback = meta.features_fallback || !feats;
    bundle.scene_scale_hint = meta.scene_scale_hint;
    Ok(bundle)
}

/// Path of frame `i`'s image inside a bundle directory.
pub fn image_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("frames").join(frame_name(i, "png"))
}
