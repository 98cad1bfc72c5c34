//! Guidance-label corruption: a token's gold label is corrupted when a
//! standard normal draw lands outside `[-λ, λ]`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::docmodel::{Document, LabelSpace};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Replace with a different category chosen uniformly.
    Incorrect,
    /// Replace with the outside category.
    Incomplete,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incorrect" => Ok(NoiseMode::Incorrect),
            "incomplete" => Ok(NoiseMode::Incomplete),
            _ => Err(Error::InvalidConfig(format!("unknown noise mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseMode::Incorrect => "incorrect",
            NoiseMode::Incomplete => "incomplete",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelNoiseConfig {
    pub lambda: f64,
    pub mode: NoiseMode,
    pub seed: u64,
}

impl LabelNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        Ok(())
    }
}

/// `P(|X| > λ)` for `X ~ N(0, 1)`.
pub fn tail_probability(lambda: f64) -> f64 {
    libm::erfc(lambda / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionStats {
    pub labeled: usize,
    pub corrupted: usize,
}

impl CorruptionStats {
    pub fn fraction(&self) -> f64 {
        if self.labeled == 0 {
            0.0
        } else {
            self.corrupted as f64 / self.labeled as f64
        }
    }
}

/// Corrupts gold labels and reports how many draws exceeded λ.
pub fn corrupt_guidance_labels_with_stats(
    d_g: &[Document],
    space: &LabelSpace,
    cfg: &LabelNoiseConfig,
) -> Result<(Vec<Document>, CorruptionStats)> {
    cfg.validate()?;
    let mut stats = CorruptionStats::default();
    let k = space.len();
    let out = d_g
        .iter()
        .map(|doc| {
            let mut r = rng::seeded(cfg.seed, 0x7AB ^ rng::stable_hash(&doc.id));
            let mut doc = doc.clone();
            for t in &mut doc.tokens {
                let Some(y) = t.gold_label else { continue };
                stats.labeled += 1;
                let x: f64 = StandardNormal.sample(&mut r);
                if x.abs() <= cfg.lambda {
                    continue;
                }
                stats.corrupted += 1;
                t.gold_label = Some(match cfg.mode {
                    NoiseMode::Incomplete => LabelSpace::OUTSIDE,
                    NoiseMode::Incorrect if k > 1 => {
                        let c = r.random_range(0..k - 1);
                        if c >= y {
                            c + 1
                        } else {
                            c
                        }
                    }
                    NoiseMode::Incorrect => y,
                });
            }
            doc
        })
        .collect();
    Ok((out, stats))
}

pub fn corrupt_guidance_labels(
    d_g: &[Document],
    space: &LabelSpace,
    cfg: &LabelNoiseConfig,
) -> Result<Vec<Document>> {
    corrupt_guidance_labels_with_stats(d_g, space, cfg).map(|(d, _)| d)
}
