use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::docmodel::LabelSpace;
use crate::enhancers::{PredictionKind, PredictionRecord};
use crate::error::{Error, Result};

pub const ANLS_THRESHOLD: f64 = 0.5;

/// Token-wise micro F1 over labels other than `outside`.
pub fn micro_f1(pred: &[usize], gold: &[usize], outside: usize) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    let predicted = pred.iter().filter(|&&p| p != outside).count();
    let actual = gold.iter().filter(|&&g| g != outside).count();
    let correct = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| p == g && **g != outside)
        .count();
    if predicted == 0 && actual == 0 {
        return Ok(1.0);
    }
    if correct == 0 {
        return Ok(0.0);
    }
    let p = correct as f64 / predicted as f64;
    let r = correct as f64 / actual as f64;
    Ok(2.0 * p * r / (p + r))
}

/// Normalized Levenshtein similarity, zeroed below `threshold`.
/// Comparison is on trimmed, lowercased characters.
pub fn anls(pred: &str, gold: &str, threshold: f64) -> f64 {
    let p = pred.trim().to_lowercase();
    let g = gold.trim().to_lowercase();
    let len = p.chars().count().max(g.chars().count());
    if len == 0 {
        return 1.0;
    }
    let sim = 1.0 - strsim::levenshtein(&p, &g) as f64 / len as f64;
    if sim >= threshold {
        sim
    } else {
        0.0
    }
}

pub fn mean_anls<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    threshold: f64,
) -> Option<f64> {
    let (sum, n) = pairs.into_iter().fold((0.0, 0usize), |(s, n), (p, g)| {
        (s + anls(p, g, threshold), n + 1)
    });
    (n > 0).then(|| sum / n as f64)
}

pub fn retrieval_accuracy(rows: &[PredictionRecord]) -> Option<f64> {
    let q: Vec<_> = rows
        .iter()
        .filter(|r| r.kind == PredictionKind::Query)
        .collect();
    (!q.is_empty()).then(|| q.iter().filter(|r| r.pred == r.gold).count() as f64 / q.len() as f64)
}

/// Accuracy per gold token category.
pub fn per_category_accuracy(
    rows: &[PredictionRecord],
    space: &LabelSpace,
) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == PredictionKind::Token) {
        if let Some(name) = space.name_of(r.gold) {
            let e = tally.entry(name.to_string()).or_default();
            e.1 += 1;
            if r.pred == r.gold {
                e.0 += 1;
            }
        }
    }
    tally
        .into_iter()
        .map(|(k, (hit, n))| (k, hit as f64 / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub micro_f1: Option<f64>,
    pub per_category: BTreeMap<String, f64>,
    pub retrieval_accuracy: Option<f64>,
    pub anls: Option<f64>,
    pub n_samples: usize,
    pub wall_time_seconds: f64,
    pub config_fingerprint: String,
}

impl MetricsReport {
    /// Micro F1 when token rows exist, else retrieval accuracy.
    pub fn primary(&self) -> Option<f64> {
        self.micro_f1.or(self.retrieval_accuracy)
    }
}

/// Aggregates a prediction dump. Label 0 of `space` is the outside label.
pub fn evaluate(
    rows: &[PredictionRecord],
    space: &LabelSpace,
    wall_time_seconds: f64,
    config_fingerprint: impl Into<String>,
) -> Result<MetricsReport> {
    let tokens: Vec<_> = rows
        .iter()
        .filter(|r| r.kind == PredictionKind::Token)
        .collect();
    let micro = if tokens.is_empty() {
        None
    } else {
        let p: Vec<usize> = tokens.iter().map(|r| r.pred).collect();
        let g: Vec<usize> = tokens.iter().map(|r| r.gold).collect();
        Some(micro_f1(&p, &g, 0)?)
    };
    let anls = mean_anls(
        rows.iter()
            .filter(|r| r.kind == PredictionKind::Query)
            .map(|r| (r.pred_text.as_str(), r.gold_text.as_str())),
        ANLS_THRESHOLD,
    );
    Ok(MetricsReport {
        micro_f1: micro,
        per_category: per_category_accuracy(rows, space),
        retrieval_accuracy: retrieval_accuracy(rows),
        anls,
        n_samples: rows.len(),
        wall_time_seconds,
        config_fingerprint: config_fingerprint.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(micro_f1(&[1, 2, 0], &[1, 2, 0], 0).unwrap(), 1.0);
        assert_eq!(micro_f1(&[0, 0, 0], &[1, 0, 2], 0).unwrap(), 0.0);
        let f = micro_f1(&[1, 3, 0, 0], &[1, 2, 2, 0], 0).unwrap();
        assert!((f - 0.4).abs() < 1e-12);
        assert!(micro_f1(&[1], &[1, 2], 0).is_err());
    }

    #[test]
    fn anls_examples() {
        assert_eq!(anls("ACME", "ACME", 0.5), 1.0);
        assert_eq!(anls("abcd", "wxyz", 0.5), 0.0);
        assert!((anls("12.50", "12.5O", 0.5) - 0.8).abs() < 1e-12);
    }
}
