//! Run configuration. Values come from the defaults, then an optional JSON
//! file (deep-merged, so partial files are fine), then command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use docadapt_core::eval::{SweepConfig, DEFAULT_FRACTIONS, DEFAULT_LAMBDAS, DEFAULT_RATIOS};
use docadapt_core::infuser::SitMemory;
use docadapt_core::neural::EncoderConfig;
use docadapt_core::synthgen::{AnnotateConfig, DocumentKind, NoiseMode};
use docadapt_core::workflow::{AdaptationPlan, TaskMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub n_documents: usize,
    pub kind: DocumentKind,
    /// Relative sizes of `D_n`, `D_g` and `D_i`.
    pub splits: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: Vec<u64>,
    pub ratios: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub noise_modes: Vec<NoiseMode>,
    pub fractions: Vec<f64>,
    /// Guidance ratio used by the size and robustness sweeps.
    pub guidance_ratio: f64,
    pub mode: TaskMode,
    /// Empty selects the built-in rows for each sweep.
    pub configs: Vec<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; copied into every seeded section when the run starts.
    pub seed: u64,
    pub corpus: CorpusSection,
    pub annotate: AnnotateConfig,
    pub provider: String,
    pub encoder: EncoderConfig,
    pub sit_memory: SitMemory,
    pub plan: AdaptationPlan,
    pub sweep: SweepSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            corpus: CorpusSection {
                n_documents: 640,
                kind: DocumentKind::Form,
                splits: [500, 40, 100],
            },
            annotate: AnnotateConfig::default(),
            provider: "rule".into(),
            encoder: EncoderConfig::default(),
            sit_memory: SitMemory::default(),
            plan: AdaptationPlan::default(),
            sweep: SweepSection {
                seeds: vec![0, 1, 2],
                ratios: DEFAULT_RATIOS.to_vec(),
                lambdas: DEFAULT_LAMBDAS.to_vec(),
                noise_modes: vec![NoiseMode::Incorrect, NoiseMode::Incomplete],
                fractions: DEFAULT_FRACTIONS.to_vec(),
                guidance_ratio: 1.0,
                mode: TaskMode::Both,
                configs: Vec::new(),
            },
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl Config {
    /// Defaults overlaid with `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let over: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let mut base = serde_json::to_value(Config::default())?;
        merge(&mut base, over);
        serde_json::from_value(base).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Checks the sections the core types can validate on their own.
    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.encoder.validate()?;
        self.annotate.layout_noise.validate()?;
        Ok(())
    }

    /// Copies the master seed into the seeded sections.
    pub fn propagate_seed(&mut self) {
        self.annotate.layout_noise.seed = self.seed;
        self.encoder.seed = self.seed;
        self.plan.seed = self.seed;
    }

    pub fn split_counts(&self) -> [usize; 3] {
        let n = self.corpus.n_documents;
        let [a, b, c] = self.corpus.splits;
        let total = (a + b + c).max(1);
        let g = (n * b + total / 2) / total;
        let i = (n * c + total / 2) / total;
        [n.saturating_sub(g + i), g, i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_overrides_only_its_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(
            &p,
            r#"{"encoder": {"hidden_dim": 32}, "plan": {"sds_epochs": 3}}"#,
        )
        .unwrap();
        let c = Config::load(Some(&p)).unwrap();
        assert_eq!(c.encoder.hidden_dim, 32);
        assert_eq!(c.encoder.n_layers, EncoderConfig::default().n_layers);
        assert_eq!(c.plan.sds_epochs, 3);
        assert_eq!(
            c.plan.learning_rate,
            AdaptationPlan::default().learning_rate
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"plan": {"sds_epoch": 3}}"#).unwrap();
        assert!(Config::load(Some(&p)).is_err());
    }

    #[test]
    fn default_split_counts() {
        assert_eq!(Config::default().split_counts(), [500, 40, 100]);
        let mut c = Config::default();
        c.corpus.n_documents = 500;
        let s = c.split_counts();
        assert_eq!(s.iter().sum::<usize>(), 500);
    }
}
