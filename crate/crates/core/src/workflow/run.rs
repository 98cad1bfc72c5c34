use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checkpoint::{Checkpoint, StageTag};
use super::plan::AdaptationPlan;
use super::train::LossRecord;
use crate::error::Result;

/// Replay record written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub stage: StageTag,
    pub plan: AdaptationPlan,
    pub plan_hash: String,
    pub seed: u64,
    pub corpus_hash: String,
    pub checkpoint_sha256: String,
    #[serde(default)]
    pub guidance_ratio: Option<f64>,
    #[serde(default)]
    pub parent_checkpoint: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    /// Command line or other caller-supplied replay information.
    #[serde(default)]
    pub command: Vec<String>,
}

/// `runs/<name>/` with `ckpt-<stage>.bin`, `run.json` and `losses.csv`.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn checkpoint_path(&self, stage: StageTag) -> PathBuf {
        self.root.join(format!("ckpt-{}.bin", stage.as_str()))
    }

    pub fn record_path(&self) -> PathBuf {
        self.root.join("run.json")
    }

    pub fn losses_path(&self) -> PathBuf {
        self.root.join("losses.csv")
    }

    /// Writes the checkpoint, loss log and run record; returns the
    /// checkpoint path.
    pub fn save(
        &self,
        ckpt: &Checkpoint,
        losses: &[LossRecord],
        record: &RunRecord,
    ) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.root)?;
        let path = self.checkpoint_path(ckpt.stage);
        std::fs::write(&path, ckpt.to_bytes()?)?;
        write_losses(&self.losses_path(), losses)?;
        std::fs::write(
            self.record_path(),
            serde_json::to_string_pretty(record)? + "\n",
        )?;
        Ok(path)
    }

    pub fn load_record(&self) -> Result<RunRecord> {
        Ok(serde_json::from_str(&std::fs::read_to_string(
            self.record_path(),
        )?)?)
    }
}

pub fn write_losses(path: &Path, losses: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for l in losses {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_losses(path: &Path) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
