use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which downstream task family a run targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    Fine,
    Coarse,
    #[default]
    Both,
}

impl TaskMode {
    pub fn fine(self) -> bool {
        matches!(self, TaskMode::Fine | TaskMode::Both)
    }

    pub fn coarse(self) -> bool {
        matches!(self, TaskMode::Coarse | TaskMode::Both)
    }
}

impl FromStr for TaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(TaskMode::Fine),
            "coarse" => Ok(TaskMode::Coarse),
            "both" => Ok(TaskMode::Both),
            other => Err(Error::InvalidConfig(format!("unknown task mode {other:?}"))),
        }
    }
}

fn default_true() -> bool {
    true
}
fn default_lr() -> f64 {
    2e-4
}
fn default_batch() -> usize {
    2
}
fn default_epochs() -> usize {
    1
}
fn default_finetune_epochs() -> usize {
    10
}

/// Epoch schedule and optimizer settings for adaptation and fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationPlan {
    #[serde(default = "default_epochs")]
    pub sds_epochs: usize,
    #[serde(default = "default_epochs")]
    pub sst_epochs: usize,
    #[serde(default = "default_epochs")]
    pub sit_epochs: usize,
    #[serde(default = "default_true")]
    pub freeze_after_sds: bool,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub task_mode: TaskMode,
    #[serde(default = "default_finetune_epochs")]
    pub finetune_epochs: usize,
    /// Fine-tuning also updates the token and entity decoders; when false
    /// only the task heads (and any unfrozen encoders) move.
    #[serde(default = "default_true")]
    pub finetune_decoders: bool,
    /// Global gradient-norm clip; `None` disables clipping.
    #[serde(default)]
    pub grad_clip: Option<f64>,
    /// Overrides `learning_rate` for the instructed-tuning stage.
    #[serde(default)]
    pub sit_learning_rate: Option<f64>,
    /// Overrides `learning_rate` for fine-tuning.
    #[serde(default)]
    pub finetune_learning_rate: Option<f64>,
}

impl Default for AdaptationPlan {
    fn default() -> Self {
        AdaptationPlan {
            sds_epochs: 1,
            sst_epochs: 1,
            sit_epochs: 1,
            freeze_after_sds: true,
            learning_rate: default_lr(),
            batch_size: default_batch(),
            seed: 0,
            task_mode: TaskMode::Both,
            finetune_epochs: default_finetune_epochs(),
            finetune_decoders: true,
            grad_clip: None,
            sit_learning_rate: None,
            finetune_learning_rate: None,
        }
    }
}

impl AdaptationPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        for lr in [
            Some(self.learning_rate),
            self.sit_learning_rate,
            self.finetune_learning_rate,
        ]
        .into_iter()
        .flatten()
        {
            if !lr.is_finite() || lr < 0.0 {
                return bad("learning rates must be finite and non-negative");
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return bad("grad_clip must be positive");
            }
        }
        Ok(())
    }

    pub fn learning_rate_for(&self, stage: &str) -> f64 {
        match stage {
            "sit" => self.sit_learning_rate,
            "finetune" => self.finetune_learning_rate,
            _ => None,
        }
        .unwrap_or(self.learning_rate)
    }

    /// Stricter check for adaptation runs: some stage must train.
    pub fn validate_adaptation(&self) -> Result<()> {
        self.validate()?;
        if self.sds_epochs + self.effective_sst() + self.effective_sit() == 0 {
            return Err(Error::InvalidConfig(
                "an adaptation run needs at least one stage with epochs > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_sst(&self) -> usize {
        if self.task_mode.fine() {
            self.sst_epochs
        } else {
            0
        }
    }

    pub fn effective_sit(&self) -> usize {
        if self.task_mode.coarse() {
            self.sit_epochs
        } else {
            0
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let p = AdaptationPlan::default();
        assert_eq!(p.learning_rate, 2e-4);
        assert_eq!(p.batch_size, 2);
        p.validate_adaptation().unwrap();
        let none = AdaptationPlan {
            sds_epochs: 0,
            sst_epochs: 0,
            sit_epochs: 0,
            ..p.clone()
        };
        assert!(none.validate_adaptation().is_err());
        let coarse_sst_only = AdaptationPlan {
            sds_epochs: 0,
            sit_epochs: 0,
            task_mode: TaskMode::Coarse,
            ..p.clone()
        };
        assert!(coarse_sst_only.validate_adaptation().is_err());
        assert!(AdaptationPlan {
            learning_rate: -1e-3,
            ..p
        }
        .validate()
        .is_err());
        assert!(AdaptationPlan {
            learning_rate: 0.0,
            ..p
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn json_defaults_fill_missing_fields() {
        let p: AdaptationPlan =
            serde_json::from_str(r#"{"sds_epochs": 2, "task_mode": "fine"}"#).unwrap();
        assert_eq!(p.sds_epochs, 2);
        assert_eq!(p.task_mode, TaskMode::Fine);
        assert!(p.freeze_after_sds);
        assert!(serde_json::from_str::<AdaptationPlan>(r#"{"bogus": 1}"#).is_err());
        assert_ne!(p.hash(), AdaptationPlan::default().hash());
    }
}
