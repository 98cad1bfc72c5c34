use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Framework, ModelSpec};
use crate::neural::checkpoint::{decode_arrays, encode_arrays, load_into};

/// Which data a set of parameters has seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageTag {
    /// Fine-tuned on the guidance set only.
    #[serde(rename = "F_t")]
    Ft,
    /// Adapted on the synthetic set only.
    #[serde(rename = "F_n")]
    Fn,
    /// Adapted, then fine-tuned.
    #[serde(rename = "F_nt")]
    Fnt,
}

impl StageTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StageTag::Ft => "F_t",
            StageTag::Fn => "F_n",
            StageTag::Fnt => "F_nt",
        }
    }
}

impl fmt::Display for StageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    stage: StageTag,
    plan_hash: String,
    metrics: BTreeMap<String, f64>,
    model: ModelSpec,
}

/// Parameters plus the stage tag, the hash of the plan that produced them
/// and metrics at save time.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Framework,
    pub stage: StageTag,
    pub plan_hash: String,
    pub metrics: BTreeMap<String, f64>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            stage: self.stage,
            plan_hash: self.plan_hash.clone(),
            metrics: self.metrics.clone(),
            model: self.model.spec.clone(),
        };
        encode_arrays(&self.model.store, serde_json::to_value(meta)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let decoded = decode_arrays(bytes)?;
        let meta: Meta = serde_json::from_value(decoded.manifest.meta.clone())
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let mut model = Framework::new(meta.model)?;
        load_into(&mut model.store, &decoded)?;
        Ok(Checkpoint {
            model,
            stage: meta.stage,
            plan_hash: meta.plan_hash,
            metrics: meta.metrics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
