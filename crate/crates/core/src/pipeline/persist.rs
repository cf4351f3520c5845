//! Scene file: `"HSPL"`, version `u32`, tagged sections (`STAT`, `DYNA`,
//! `DEFM`, `META`) each prefixed by a `u64` byte length, then a CRC-64/XZ of
//! everything before it. All integers and floats little-endian; floats are
//! stored as `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use serde::{Deserialize, Serialize};

use crate::dynamics::DeformationField;
use crate::nn::{Mlp, MlpSpec};
use crate::scene::{Gaussian3D, HybridScene};
use crate::{Error, Real, Result};

pub const SCENE_MAGIC: &[u8; 4] = b"HSPL";
pub const SCENE_VERSION: u32 = 1;
const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Serialize, Deserialize)]
struct FieldMeta {
    spec: MlpSpec,
    position_freqs: usize,
    time_freqs: usize,
    scene_center: [f64; 3],
    scene_scale: f64,
    num_frames: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneMeta {
    num_frames: usize,
    scene_scale: f64,
    scene_center: [f64; 3],
    sh_degree: usize,
    feature_dim: usize,
    deformation: Option<FieldMeta>,
}

fn put_section(out: &mut Vec<u8>, tag: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(body);
}

fn encode_gaussians<T: Real>(gs: &[Gaussian3D<T>], sh_len: usize, feat_len: usize) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&(gs.len() as u64).to_le_bytes());
    b.extend_from_slice(&(sh_len as u32).to_le_bytes());
    b.extend_from_slice(&(feat_len as u32).to_le_bytes());
    let mut put = |v: T| b.extend_from_slice(&v.as_f64().to_le_bytes());
    for g in gs {
        g.position.iter().chain(&g.rotation).chain(&g.log_scale).for_each(|&v| put(v));
        put(g.opacity_logit);
        g.sh.iter().flatten().for_each(|&v| put(v));
        g.feature.iter().for_each(|&v| put(v));
        put(g.dynamic_score);
    }
    b
}

/// Serializes the scene. Fails if the scene violates its invariants.
pub fn scene_to_bytes<T: Real>(scene: &HybridScene<T>) -> Result<Vec<u8>> {
    scene.validate()?;
    let sh_len = crate::scene::coeff_count(scene.sh_degree);
    let meta = SceneMeta {
        num_frames: scene.num_frames,
        scene_scale: scene.scene_scale.as_f64(),
        scene_center: scene.scene_center.map(|v| v.as_f64()),
        sh_degree: scene.sh_degree,
        feature_dim: scene.feature_dim,
        deformation: scene.deformation.as_ref().map(|f| FieldMeta {
            spec: f.mlp.spec.clone(),
            position_freqs: f.position_freqs,
            time_freqs: f.time_freqs,
            scene_center: f.scene_center.map(|v| v.as_f64()),
            scene_scale: f.scene_scale.as_f64(),
            num_frames: f.num_frames,
        }),
    };
    let mut out = Vec::new();
    out.extend_from_slice(SCENE_MAGIC);
    out.extend_from_slice(&SCENE_VERSION.to_le_bytes());
    put_section(&mut out, b"STAT", &encode_gaussians(&scene.static_gaussians, sh_len, scene.feature_dim));
    put_section(&mut out, b"DYNA", &encode_gaussians(&scene.dynamic_gaussians, sh_len, scene.feature_dim));
    if let Some(f) = &scene.deformation {
        let mut body = Vec::with_capacity(8 + 8 * f.mlp.params.len());
        body.extend_from_slice(&(f.mlp.params.len() as u64).to_le_bytes());
        for p in &f.mlp.params {
            body.extend_from_slice(&p.as_f64().to_le_bytes());
        }
        put_section(&mut out, b"DEFM", &body);
    }
    put_section(&mut out, b"META", &serde_json::to_vec(&meta)?);
    let crc = CHECKSUM.checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.at < n {
            return Err(Error::Integrity("unexpected end of data".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn done(&self) -> bool {
        self.at == self.buf.len()
    }
}

fn decode_gaussians<T: Real>(body: &[u8]) -> Result<(Vec<Gaussian3D<T>>, usize, usize)> {
    let mut r = Reader { buf: body, at: 0 };
    let n = r.u64()? as usize;
    let sh_len = r.u32()? as usize;
    let feat_len = r.u32()? as usize;
    let per = 11 + 3 * sh_len + feat_len + 1;
    if (body.len() - r.at) != n.checked_mul(per * 8).ok_or_else(|| Error::Integrity("Gaussian count overflow".into()))? {
        return Err(Error::Integrity("Gaussian section length does not match its header".into()));
    }
    let mut gs = Vec::with_capacity(n);
    for _ in 0..n {
        let v = |r: &mut Reader| r.f64().map(T::lit);
        let position = [v(&mut r)?, v(&mut r)?, v(&mut r)?];
        let rotation = [v(&mut r)?, v(&mut r)?, v(&mut r)?, v(&mut r)?];
        let log_scale = [v(&mut r)?, v(&mut r)?, v(&mut r)?];
        let opacity_logit = v(&mut r)?;
        let mut sh = Vec::with_capacity(sh_len);
        for _ in 0..sh_len {
            sh.push([v(&mut r)?, v(&mut r)?, v(&mut r)?]);
        }
        let mut feature = Vec::with_capacity(feat_len);
        for _ in 0..feat_len {
            feature.push(v(&mut r)?);
        }
        let dynamic_score = v(&mut r)?;
        gs.push(Gaussian3D {
            position,
            rotation,
            log_scale,
            opacity_logit,
            sh,
            feature,
            dynamic_score,
        });
    }
    Ok((gs, sh_len, feat_len))
}

pub fn scene_from_bytes<T: Real>(data: &[u8]) -> Result<HybridScene<T>> {
    if data.len() < 16 || &data[..4] != SCENE_MAGIC {
        return Err(Error::Integrity("not a scene file (bad magic or too short)".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().expect("4 bytes"));
    if version != SCENE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: SCENE_VERSION,
        });
    }
    let (body, tail) = data.split_at(data.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if CHECKSUM.checksum(body) != stored {
        return Err(Error::Integrity("checksum mismatch (corrupt or truncated file)".into()));
    }
    let mut r = Reader { buf: body, at: 8 };
    let (mut stat, mut dyna, mut defm, mut meta) = (None, None, None, None);
    while !r.done() {
        let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        let len = r.u64()? as usize;
        let sec = r.take(len)?;
        let slot = match &tag {
            b"STAT" => &mut stat,
            b"DYNA" => &mut dyna,
            b"DEFM" => &mut defm,
            b"META" => &mut meta,
            _ => return Err(Error::Integrity(format!("unknown section {:?}", String::from_utf8_lossy(&tag)))),
        };
        if slot.replace(sec).is_some() {
            return Err(Error::Integrity("duplicate section".into()));
        }
    }
    let meta: SceneMeta = serde_json::from_slice(meta.ok_or_else(|| Error::Integrity("missing META section".into()))?)
        .map_err(|e| Error::Integrity(format!("metadata: {e}")))?;
    let (static_gaussians, ..) = decode_gaussians(stat.ok_or_else(|| Error::Integrity("missing STAT section".into()))?)?;
    let (dynamic_gaussians, ..) = decode_gaussians(dyna.ok_or_else(|| Error::Integrity("missing DYNA section".into()))?)?;
    let deformation = match (meta.deformation, defm) {
        (None, None) => None,
        (Some(fm), Some(body)) => {
            let mut rd = Reader { buf: body, at: 0 };
            let n = rd.u64()? as usize;
            if body.len() != 8 + 8 * n {
                return Err(Error::Integrity("deformation section length mismatch".into()));
            }
            let params = (0..n).map(|_| rd.f64().map(T::lit)).collect::<Result<Vec<T>>>()?;
            Some(DeformationField {
                mlp: Mlp::from_params(fm.spec, params).map_err(|e| Error::Integrity(format!("deformation network: {e}")))?,
                position_freqs: fm.position_freqs,
                time_freqs: fm.time_freqs,
                scene_center: fm.scene_center.map(T::lit),
                scene_scale: T::lit(fm.scene_scale),
                num_frames: fm.num_frames,
            })
        }
        _ => return Err(Error::Integrity("deformation metadata and parameters disagree".into())),
    };
    let scene = HybridScene {
        static_gaussians,
        dynamic_gaussians,
        deformation,
        num_frames: meta.num_frames,
        scene_scale: T::lit(meta.scene_scale),
        scene_center: meta.scene_center.map(T::lit),
        sh_degree: meta.sh_degree,
        feature_dim: meta.feature_dim,
    };
    scene.validate().map_err(|e| Error::Integrity(format!("decoded scene is invalid: {e}")))?;
    Ok(scene)
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(source) = res {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, source));
    }
    Ok(())
}

pub fn save_scene<T: Real>(scene: &HybridScene<T>, path: &Path) -> Result<()> {
    write_atomic(path, &scene_to_bytes(scene)?)
}

pub fn load_scene<T: Real>(path: &Path) -> Result<HybridScene<T>> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    scene_from_bytes(&data)
}
