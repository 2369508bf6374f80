use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FORMAT: &str = "ideaforge-manifest/1";

/// Content hashes of what a stage read and wrote on its last successful run.
/// Paths are relative to the work directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    /// Hash of the configuration the stage depends on.
    pub settings: String,
    pub inputs: BTreeMap<PathBuf, String>,
    pub outputs: BTreeMap<PathBuf, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            format: MANIFEST_FORMAT.into(),
            stages: BTreeMap::new(),
        }
    }
}

impl Manifest {
    /// An unreadable or foreign manifest counts as empty, so every stage
    /// reruns.
    pub fn load(path: &Path) -> Self {
        fs::read(path)
            .ok()
            .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
            .filter(|m| m.format == MANIFEST_FORMAT)
            .unwrap_or_default()
    }

    /// True when `stage` last ran with the same settings and inputs and its
    /// outputs, resolved against `work_dir`, are still on disk unchanged.
    pub fn is_current(
        &self,
        stage: &str,
        seed: u64,
        settings: &str,
        inputs: &BTreeMap<PathBuf, String>,
        work_dir: &Path,
    ) -> bool {
        let Some(rec) = self.stages.get(stage) else {
            return false;
        };
        rec.seed == seed
            && rec.settings == settings
            && &rec.inputs == inputs
            && rec
                .outputs
                .iter()
                .all(|(p, h)| hash_file(&work_dir.join(p)).is_some_and(|actual| &actual == h))
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| hash_bytes(&b))
}

/// `path` expressed relative to `base`, lexically. Both are expected to be
/// rooted the same way (both absolute or both relative to one directory).
pub fn relative_to(path: &Path, base: &Path) -> PathBuf {
    let p: Vec<Component> = path.components().collect();
    let b: Vec<Component> = base.components().collect();
    let common = p.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &p[common..] {
        out.push(c.as_os_str());
    }
    out
}
