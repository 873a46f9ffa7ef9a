//! Run manifest: per-stage input/output digests plus the hashes that pin a
//! run's configuration, written atomically after each stage so a run can
//! always be audited and reproduced.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub prompt_template_hash: String,
    pub aspect_set_hash: String,
    pub backend_model: String,
    #[serde(default)]
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Unix seconds at stage completion.
    pub completed_at: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot digest {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    const FILE_NAME: &'static str = "manifest.json";

    pub fn load_or_default(output_dir: &Path) -> Result<Self> {
        let path = output_dir.join(Self::FILE_NAME);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is corrupt", path.display()))
    }

    /// Records a completed stage and writes the manifest atomically
    /// (temp file + rename).
    pub fn record_stage(
        &mut self,
        output_dir: &Path,
        stage: &str,
        inputs: &[(&str, &Path)],
        outputs: &[(&str, &Path)],
    ) -> Result<()> {
        let digest_map = |entries: &[(&str, &Path)]| -> Result<BTreeMap<String, String>> {
            entries
                .iter()
                .filter(|(_, path)| path.exists())
                .map(|(name, path)| Ok((name.to_string(), digest_file(path)?)))
                .collect()
        };
        let record = StageRecord {
            inputs: digest_map(inputs)?,
            outputs: digest_map(outputs)?,
            completed_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        self.stages.insert(stage.to_string(), record);

        let path = output_dir.join(Self::FILE_NAME);
        let tmp = output_dir.join(format!("{}.tmp", Self::FILE_NAME));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&tmp, text).with_context(|| format!("cannot write {}", tmp.display()))?;
        std::fs::rename(&tmp, &path)
            .with_context(|| format!("cannot replace {}", path.display()))?;
        Ok(())
    }
}
