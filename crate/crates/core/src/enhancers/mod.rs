//! Task-specific heads trained on the guidance set: sequence tagging over
//! max-pooled token stages and pointer-based entity retrieval.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infuser::{pointer_logits, Alignment};
use crate::neural::graph::{Graph, Mat, Var};
use crate::neural::layers::{Linear, TransformerDecoder};
use crate::neural::{EncoderConfig, ParamGroup, ParamStore};

/// `Linear(Maxpool(T̃, T′, T″))` over the gold label space.
#[derive(Debug, Clone)]
pub struct TagHead {
    pub classifier: Linear,
}

impl TagHead {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig, n_gold: usize) -> Self {
        TagHead {
            classifier: Linear::new(
                store,
                "tag_head.classifier",
                ParamGroup::TagHead,
                cfg.hidden_dim,
                n_gold,
            ),
        }
    }

    /// Pools whichever stages are supplied.
    pub fn forward(&self, g: &mut Graph, stages: &[Var]) -> Result<Var> {
        let pooled = maxpool(g, stages)?;
        Ok(self.classifier.forward(g, pooled))
    }
}

/// Elementwise maximum over same-shaped stages.
pub fn maxpool(g: &mut Graph, stages: &[Var]) -> Result<Var> {
    let Some(&first) = stages.first() else {
        return Err(Error::DimensionMismatch("no stages to pool".into()));
    };
    let shape = g.shape(first);
    if let Some(&bad) = stages.iter().find(|&&s| g.shape(s) != shape) {
        return Err(Error::DimensionMismatch(format!(
            "stage shapes {:?} and {:?}",
            shape,
            g.shape(bad)
        )));
    }
    Ok(if stages.len() == 1 {
        first
    } else {
        g.max_of(stages)
    })
}

/// `PN(D_er(Maxpool(E′, E″), Q))`.
#[derive(Debug, Clone)]
pub struct RetrievalHead {
    pub decoder: TransformerDecoder,
}

impl RetrievalHead {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        RetrievalHead {
            decoder: TransformerDecoder::new(
                store,
                "retrieval_head.decoder",
                ParamGroup::RetrievalHead,
                cfg.hidden_dim,
                cfg.n_heads,
                cfg.decoder_layers,
            ),
        }
    }

    /// Pointer logits (`1 × m`).
    pub fn forward(
        &self,
        g: &mut Graph,
        alignment: &Alignment,
        entity_stages: &[Var],
        query_seq: Var,
        query_pooled: Var,
    ) -> Result<Var> {
        let pooled = maxpool(g, entity_stages)?;
        if g.rows(pooled) == 0 {
            return Err(Error::NoEntities);
        }
        let h = self.decoder.forward(g, pooled, query_seq);
        pointer_logits(g, alignment, query_pooled, h)
    }
}

#[derive(Debug, Clone)]
pub struct Enhancers {
    pub tag_head: TagHead,
    pub retrieval_head: RetrievalHead,
}

impl Enhancers {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig, n_gold: usize) -> Self {
        Enhancers {
            tag_head: TagHead::new(store, cfg, n_gold),
            retrieval_head: RetrievalHead::new(store, cfg),
        }
    }
}

/// Index of the first maximum.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-token argmax label; ties go to the lowest id.
pub fn predict_tags(logits: &Mat) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| argmax(r.iter().copied()))
        .collect()
}

/// Argmax entity position of a pointer distribution (or its logits).
pub fn retrieve_entity(distribution: &[f64]) -> usize {
    argmax(distribution.iter().copied())
}

/// Row-wise softmax of pointer logits.
pub fn pointer_distribution(logits: &Mat) -> Vec<f64> {
    let row = logits.row(0);
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionKind {
    Token,
    Query,
}

/// One prediction dump row. Token rows index tokens; query rows index the
/// document's QA pairs and carry entity ids plus the key and answer texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub kind: PredictionKind,
    pub doc_id: String,
    pub index: usize,
    pub gold: usize,
    pub pred: usize,
    pub gold_text: String,
    pub pred_text: String,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn predictions_to_csv(rows: &[PredictionRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.flush()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(retrieve_entity(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(retrieve_entity(&[0.0, 1.0, 0.0]), 1);
        assert_eq!(
            predict_tags(&array![[1.0, 3.0, 3.0], [2.0, 0.0, 1.0]]),
            vec![1, 0]
        );
    }

    #[test]
    fn distribution_sums_to_one() {
        let d = pointer_distribution(&array![[1.0, -2.0, 0.5]]);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
