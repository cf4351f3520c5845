//! Input reading and all-or-nothing output directories.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybrid_splat::Error;
use serde::Serialize;

/// Written last into every output directory; marks it as replaceable.
pub const MANIFEST: &str = "manifest.json";

/// Reads a user-supplied file; failures count as invalid input.
pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())).into())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_input(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::invalid(format!("{}: {e}", path.display())).into())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// The parent of an output path must already exist.
pub fn check_parent(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::invalid(format!("output directory {} does not exist", parent.display())).into());
    }
    Ok(())
}

/// Output directory built under a temporary sibling and renamed into place
/// on [`commit`](Self::commit). Dropped uncommitted, it leaves nothing.
pub struct StagedDir {
    tmp: PathBuf,
    target: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl StagedDir {
    /// Fails when `target` exists and is neither empty nor a previous output.
    pub fn new(target: &Path) -> Result<Self> {
        check_parent(target)?;
        if target.exists() {
            let replaceable = target.is_dir()
                && (target.join(MANIFEST).is_file() || fs::read_dir(target).map(|mut d| d.next().is_none()).unwrap_or(false));
            if !replaceable {
                return Err(Error::invalid(format!(
                    "{} exists and was not written by hybridsplat; refusing to replace it",
                    target.display()
                ))
                .into());
            }
        }
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = target
            .file_name()
            .ok_or_else(|| Error::invalid(format!("{} has no directory name", target.display())))?
            .to_string_lossy();
        let tmp = parent.join(format!(".{name}.tmp{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).with_context(|| format!("clearing {}", tmp.display()))?;
        }
        fs::create_dir_all(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        Ok(StagedDir {
            tmp,
            target: target.to_path_buf(),
            files: Vec::new(),
            committed: false,
        })
    }

    /// Writes `rel` (relative path, parents created) into the staging area.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.tmp.join(rel);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn commit(mut self, command: &str) -> Result<()> {
        self.files.sort();
        let manifest = serde_json::json!({ "command": command, "files": self.files });
        fs::write(self.tmp.join(MANIFEST), json_bytes(&manifest)?).context("writing manifest")?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("removing old {}", self.target.display()))?;
        }
        fs::rename(&self.tmp, &self.target).with_context(|| format!("moving output into {}", self.target.display()))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}
