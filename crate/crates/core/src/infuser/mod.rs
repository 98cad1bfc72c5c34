//! Domain knowledge infuser: joint-grained encoder, structural alignment
//! (SDS), synthetic sequence tagging decoder (SST) and synthetic
//! instruction decoder with pointer net (SIT).

use serde::{Deserialize, Serialize};

use crate::docmodel::RelationMatrix;
use crate::error::{Error, Result};
use crate::neural::graph::{Graph, Mat, Var};
use crate::neural::layers::{Linear, TransformerDecoder, TransformerEncoder, INIT_STD};
use crate::neural::{EncoderConfig, Init, ParamGroup, ParamId, ParamStore};

/// Segment ids of the joint sequence.
const TOKEN_SEGMENT: usize = 0;
const ENTITY_SEGMENT: usize = 1;

/// `[T′, E′] = E_jg([T, E])` with segment embeddings.
#[derive(Debug, Clone)]
pub struct JointEncoder {
    pub segments: ParamId,
    pub encoder: TransformerEncoder,
}

#[derive(Debug, Clone, Copy)]
pub struct JointVars {
    pub tokens: Var,
    pub entities: Var,
}

impl JointEncoder {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        let grp = ParamGroup::JointEncoder;
        JointEncoder {
            segments: store.register(
                "joint.segments",
                grp,
                (2, cfg.hidden_dim),
                Init::Normal(INIT_STD),
            ),
            encoder: TransformerEncoder::new(
                store,
                "joint.encoder",
                grp,
                cfg.hidden_dim,
                cfg.n_heads,
                cfg.n_layers,
            ),
        }
    }

    pub fn forward(&self, g: &mut Graph, tokens: Var, entities: Var) -> JointVars {
        let n = g.rows(tokens);
        let m = g.rows(entities);
        let seg = g.param(self.segments);
        let st = g.gather(seg, &vec![TOKEN_SEGMENT; n]);
        let se = g.gather(seg, &vec![ENTITY_SEGMENT; m]);
        let t = g.add(tokens, st);
        let e = g.add(entities, se);
        let x = g.concat_rows(&[t, e]);
        let y = self.encoder.forward(g, x);
        JointVars {
            tokens: g.slice_rows(y, 0, n),
            entities: g.slice_rows(y, n, m),
        }
    }
}

/// `γ = LinearA(T′) · LinearB(E′)ᵀ`.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub token_proj: Linear,
    pub entity_proj: Linear,
}

impl Alignment {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        let h = cfg.hidden_dim;
        Alignment {
            token_proj: Linear::new(store, "alignment.token", ParamGroup::Alignment, h, h),
            entity_proj: Linear::new(store, "alignment.entity", ParamGroup::Alignment, h, h),
        }
    }

    /// Score matrix, one row per left-hand row and one column per entity.
    pub fn scores(&self, g: &mut Graph, left: Var, entities: Var) -> Var {
        let a = self.token_proj.forward(g, left);
        let b = self.entity_proj.forward(g, entities);
        g.matmul_t(a, b)
    }
}

/// MSE between `sigmoid(γ)` and the binary relation matrix.
pub fn sds_loss(g: &mut Graph, scores: Var, truth: &Mat) -> Result<Var> {
    if g.shape(scores) != truth.dim() {
        return Err(Error::DimensionMismatch(format!(
            "scores {:?} against relation {:?}",
            g.shape(scores),
            truth.dim()
        )));
    }
    let p = g.sigmoid(scores);
    Ok(g.mse(p, truth.clone()))
}

/// Token decoder `D_T` with a linear head over the synthetic label space.
#[derive(Debug, Clone)]
pub struct SstDecoder {
    pub decoder: TransformerDecoder,
    pub head: Linear,
}

impl SstDecoder {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig, n_synthetic: usize) -> Self {
        let grp = ParamGroup::TokenDecoder;
        let h = cfg.hidden_dim;
        SstDecoder {
            decoder: TransformerDecoder::new(
                store,
                "sst.decoder",
                grp,
                h,
                cfg.n_heads,
                cfg.decoder_layers,
            ),
            head: Linear::new(store, "sst.head", grp, h, n_synthetic),
        }
    }

    /// Returns `(T″, logits)`.
    pub fn forward(&self, g: &mut Graph, tokens: Var, entities: Var) -> (Var, Var) {
        let t2 = self.decoder.forward(g, tokens, entities);
        let logits = self.head.forward(g, t2);
        (t2, logits)
    }
}

pub fn sst_loss(g: &mut Graph, logits: Var, labels: &[Option<usize>], doc: &str) -> Result<Var> {
    let labels: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::MissingLabel {
                doc: doc.to_string(),
                token: i,
            })
        })
        .collect::<Result<_>>()?;
    let k = g.cols(logits);
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Index { index: bad, len: k });
    }
    Ok(g.cross_entropy(logits, &labels))
}

/// Memory sequence of the instruction decoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SitMemory {
    /// Query followed by the fine-grained token states.
    #[default]
    QueryTokens,
    /// Query followed by the entity states.
    QueryEntities,
}

/// Entity decoder `D_E`.
#[derive(Debug, Clone)]
pub struct SitDecoder {
    pub decoder: TransformerDecoder,
}

impl SitDecoder {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        SitDecoder {
            decoder: TransformerDecoder::new(
                store,
                "sit.decoder",
                ParamGroup::EntityDecoder,
                cfg.hidden_dim,
                cfg.n_heads,
                cfg.decoder_layers,
            ),
        }
    }

    /// `E″ = D_E(E′, memory)`.
    pub fn forward(&self, g: &mut Graph, entities: Var, memory: Var) -> Var {
        self.decoder.forward(g, entities, memory)
    }
}

pub fn sit_memory(g: &mut Graph, mode: SitMemory, query: Var, tokens: Var, entities: Var) -> Var {
    match mode {
        SitMemory::QueryTokens => g.concat_rows(&[query, tokens]),
        SitMemory::QueryEntities => g.concat_rows(&[query, entities]),
    }
}

/// Pointer logits (`1 × m`): alignment scores between the pooled query and
/// each candidate entity state.
pub fn pointer_logits(
    g: &mut Graph,
    alignment: &Alignment,
    pooled_query: Var,
    entities: Var,
) -> Result<Var> {
    if g.rows(entities) == 0 {
        return Err(Error::NoEntities);
    }
    Ok(alignment.scores(g, pooled_query, entities))
}

/// `−log p(target)` under the pointer softmax.
pub fn pointer_loss(g: &mut Graph, logits: Var, target: usize) -> Result<Var> {
    let m = g.cols(logits);
    if target >= m {
        return Err(Error::Index {
            index: target,
            len: m,
        });
    }
    Ok(g.cross_entropy(logits, &[target]))
}

/// All infuser components.
#[derive(Debug, Clone)]
pub struct Infuser {
    pub joint: JointEncoder,
    pub alignment: Alignment,
    pub sst: SstDecoder,
    pub sit: SitDecoder,
}

impl Infuser {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig, n_synthetic: usize) -> Self {
        Infuser {
            joint: JointEncoder::new(store, cfg),
            alignment: Alignment::new(store, cfg),
            sst: SstDecoder::new(store, cfg, n_synthetic),
            sit: SitDecoder::new(store, cfg),
        }
    }
}

/// Score matrix with its elementwise sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPrediction {
    pub scores: Mat,
    pub probabilities: Mat,
}

impl AlignmentPrediction {
    pub fn from_scores(scores: Mat) -> Self {
        let probabilities = scores.mapv(|v| 1.0 / (1.0 + (-v).exp()));
        AlignmentPrediction {
            scores,
            probabilities,
        }
    }

    /// Mean squared error against a relation matrix.
    pub fn mse(&self, truth: &RelationMatrix) -> Result<f64> {
        let t = truth.to_dense();
        if t.dim() != self.probabilities.dim() {
            return Err(Error::DimensionMismatch(format!(
                "prediction {:?} against relation {:?}",
                self.probabilities.dim(),
                t.dim()
            )));
        }
        let n = t.len().max(1) as f64;
        Ok((&self.probabilities - &t).mapv(|v| v * v).sum() / n)
    }
}
