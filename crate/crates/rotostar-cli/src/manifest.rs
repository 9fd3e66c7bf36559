//! Artifact bookkeeping: every file a run writes is registered here and ends
//! up in `manifest.json` with its SHA-256 checksum and size, so a reader can
//! verify completeness and integrity of the artifact directory.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    /// relative path → checksum, sorted for reproducible serialization
    pub files: BTreeMap<String, ManifestEntry>,
}

/// Records artifact paths as they are written.
pub struct ArtifactLog {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl ArtifactLog {
    pub fn new(root: &Path) -> Self {
        ArtifactLog {
            root: root.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Register a file that was just written under the artifact root.
    pub fn record(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    /// Register every regular file under `dir` (for helpers that write a whole
    /// directory at once).
    pub fn record_dir(&mut self, dir: &Path) -> io::Result<()> {
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    self.files.push(p);
                }
            }
        }
        Ok(())
    }

    /// Hash every recorded file and write `manifest.json` at the root.
    pub fn write_manifest(&self, seed: u64) -> io::Result<PathBuf> {
        let mut files = BTreeMap::new();
        for path in &self.files {
            let data = std::fs::read(path)?;
            let digest = Sha256::digest(&data);
            let rel = path
                .strip_prefix(&self.root)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            files.insert(
                rel,
                ManifestEntry {
                    sha256: format!("{digest:x}"),
                    bytes: data.len() as u64,
                },
            );
        }
        let manifest = Manifest {
            version: 1,
            seed,
            files,
        };
        let out = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        std::fs::write(&out, text + "\n")?;
        Ok(out)
    }
}

/// Re-hash every file listed in a manifest; returns the paths that are missing
/// or whose checksum no longer matches.
pub fn verify(root: &Path) -> io::Result<(Manifest, Vec<String>)> {
    let text = std::fs::read_to_string(root.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(io::Error::other)?;
    let mut bad = Vec::new();
    for (rel, entry) in &manifest.files {
        let path = root.join(rel);
        match std::fs::read(&path) {
            Ok(data) => {
                let digest = format!("{:x}", Sha256::digest(&data));
                if digest != entry.sha256 {
                    bad.push(rel.clone());
                }
            }
            Err(_) => bad.push(rel.clone()),
        }
    }
    Ok((manifest, bad))
}
