use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use fqw_core::Result;

/// Opens `path` for reading, naming it in any error.
pub fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: std::io::Error) -> fqw_core::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into()
}

/// Resolves relative output paths against `OUTPUT_DIR` when it is set.
pub fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os("OUTPUT_DIR") {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes `bytes` next to `path` under a temporary name and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| with_path(parent, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| with_path(path, e))
}

/// Renders with `render` into memory, then writes atomically.
pub fn emit(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Artifact> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_atomic(path, &buf)?;
    Ok(Artifact::new(path, &buf))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl Artifact {
    fn new(path: &Path, content: &[u8]) -> Self {
        Artifact {
            path: path.to_string_lossy().into_owned(),
            bytes: content.len(),
            sha256: hex::encode(Sha256::digest(content)),
        }
    }

    /// Path relative to `base` when it lies below it.
    pub fn relative_to(mut self, base: &Path) -> Self {
        if let Ok(rel) = Path::new(&self.path).strip_prefix(base) {
            self.path = rel.to_string_lossy().into_owned();
        }
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub run: String,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new(
        run: impl Into<String>,
        base: &Path,
        artifacts: impl IntoIterator<Item = Artifact>,
    ) -> Self {
        let mut artifacts: Vec<Artifact> =
            artifacts.into_iter().map(|a| a.relative_to(base)).collect();
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        Manifest {
            run: run.into(),
            artifacts,
        }
    }

    pub fn write(&self, path: &Path) -> Result<Artifact> {
        emit(path, |buf| fqw_core::io::write_json(self, buf, true))
    }
}
