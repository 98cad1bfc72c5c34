//! The assembled framework: general-domain encoders, infuser and task heads
//! over one parameter store.

use serde::{Deserialize, Serialize};

use crate::docmodel::{Document, LabelSpaces};
use crate::enhancers::{pointer_distribution, predict_tags, retrieve_entity, Enhancers};
use crate::error::{Error, Result};
use crate::infuser::{sit_memory, AlignmentPrediction, Infuser, JointVars, SitMemory};
use crate::neural::graph::{Graph, Mat, Var};
use crate::neural::{
    query_ids, DocFeatures, EncoderConfig, EntityStates, GdeVars, GeneralEncoders, ParamStore,
    QueryEncoding, TokenStates, Vocab,
};

/// Architecture switches stored with the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoder: EncoderConfig,
    pub vocab: Vocab,
    pub labels: LabelSpaces,
    #[serde(default)]
    pub sit_memory: SitMemory,
    /// Token-only pipeline: no joint encoder, no decoders; heads read the
    /// general-domain stages directly.
    #[serde(default)]
    pub mono_grained: bool,
}

impl ModelSpec {
    /// Builds the vocabulary from the token text of `docs`.
    pub fn from_corpus<'a>(
        docs: impl IntoIterator<Item = &'a Document>,
        labels: LabelSpaces,
        encoder: EncoderConfig,
        sit_memory: SitMemory,
    ) -> Self {
        let vocab = Vocab::build(docs, encoder.vocab_size);
        ModelSpec {
            encoder,
            vocab,
            labels,
            sit_memory,
            mono_grained: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Framework {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub gde: GeneralEncoders,
    pub infuser: Infuser,
    pub enhancers: Enhancers,
}

/// Graph handles of the encoder stages.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub gde: GdeVars,
    pub joint: JointVars,
}

/// Encoder stage values of one document, reusable while the encoders are
/// frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    pub tokens_gde: Mat,
    pub entities_fused: Mat,
    pub tokens_joint: Mat,
    pub entities_joint: Mat,
}

impl PartialEq for Framework {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.store == other.store
    }
}

impl Framework {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.encoder.validate()?;
        if spec.vocab.len() > spec.encoder.vocab_size {
            return Err(Error::InvalidConfig(format!(
                "vocabulary of {} words exceeds vocab_size {}",
                spec.vocab.len(),
                spec.encoder.vocab_size
            )));
        }
        let cfg = &spec.encoder;
        let mut store = ParamStore::new(cfg.seed);
        let gde = GeneralEncoders::new(&mut store, cfg);
        let infuser = Infuser::new(&mut store, cfg, spec.labels.synthetic.len());
        let enhancers = Enhancers::new(&mut store, cfg, spec.labels.gold.len());
        Ok(Framework {
            spec,
            store,
            gde,
            infuser,
            enhancers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.spec.encoder
    }

    pub fn features(&self, doc: &Document) -> Result<DocFeatures> {
        DocFeatures::new(doc, &self.spec.vocab, &self.spec.encoder)
    }

    pub fn query_ids(&self, text: &str) -> Result<Vec<usize>> {
        query_ids(text, &self.spec.vocab, &self.spec.encoder)
    }

    /// GDE and joint stages, either computed live or read from `cache`.
    pub fn encode(
        &self,
        g: &mut Graph,
        feats: &DocFeatures,
        cache: Option<&EncodedDoc>,
    ) -> Encoded {
        match cache {
            Some(c) => Encoded {
                gde: GdeVars {
                    tokens: g.constant(c.tokens_gde.clone()),
                    entities: g.constant(c.entities_fused.clone()),
                },
                joint: JointVars {
                    tokens: g.constant(c.tokens_joint.clone()),
                    entities: g.constant(c.entities_joint.clone()),
                },
            },
            None => {
                let gde = self.gde.forward(g, feats);
                let joint = if self.spec.mono_grained {
                    JointVars {
                        tokens: gde.tokens,
                        entities: gde.entities,
                    }
                } else {
                    self.infuser.joint.forward(g, gde.tokens, gde.entities)
                };
                Encoded { gde, joint }
            }
        }
    }

    /// Deterministic encoder pass (no dropout).
    pub fn encode_values(&self, feats: &DocFeatures) -> EncodedDoc {
        let mut g = Graph::new(&self.store);
        let e = self.encode(&mut g, feats, None);
        EncodedDoc {
            tokens_gde: g.value(e.gde.tokens).clone(),
            entities_fused: g.value(e.gde.entities).clone(),
            tokens_joint: g.value(e.joint.tokens).clone(),
            entities_joint: g.value(e.joint.entities).clone(),
        }
    }

    /// Query sequence and its mean-pooled row.
    pub fn query(&self, g: &mut Graph, ids: &[usize], cache: Option<&Mat>) -> (Var, Var) {
        let seq = match cache {
            Some(m) => g.constant(m.clone()),
            None => self.gde.tokens.forward_query(g, ids),
        };
        let pooled = g.mean_rows(seq);
        (seq, pooled)
    }

    pub fn query_values(&self, ids: &[usize]) -> Mat {
        let mut g = Graph::new(&self.store);
        let (seq, _) = self.query(&mut g, ids, None);
        g.value(seq).clone()
    }

    /// `(T″, synthetic logits)`.
    pub fn sst(&self, g: &mut Graph, enc: &Encoded) -> (Var, Var) {
        self.infuser
            .sst
            .forward(g, enc.joint.tokens, enc.joint.entities)
    }

    /// Gold-label logits from the max-pooled token stages.
    pub fn tag_logits(&self, g: &mut Graph, enc: &Encoded) -> Result<Var> {
        if self.spec.mono_grained {
            return self.enhancers.tag_head.forward(g, &[enc.gde.tokens]);
        }
        let (t2, _) = self.sst(g, enc);
        self.enhancers
            .tag_head
            .forward(g, &[enc.gde.tokens, enc.joint.tokens, t2])
    }

    /// `E″` for one query.
    pub fn sit_entities(&self, g: &mut Graph, enc: &Encoded, query_seq: Var) -> Var {
        let memory = sit_memory(
            g,
            self.spec.sit_memory,
            query_seq,
            enc.joint.tokens,
            enc.joint.entities,
        );
        self.infuser.sit.forward(g, enc.joint.entities, memory)
    }

    /// SIT pointer logits over entities.
    pub fn sit_logits(
        &self,
        g: &mut Graph,
        enc: &Encoded,
        query_seq: Var,
        query_pooled: Var,
    ) -> Result<Var> {
        if g.rows(enc.joint.entities) == 0 {
            return Err(Error::NoEntities);
        }
        let e2 = self.sit_entities(g, enc, query_seq);
        crate::infuser::pointer_logits(g, &self.infuser.alignment, query_pooled, e2)
    }

    /// Retrieval-head pointer logits over entities.
    pub fn retrieval_logits(
        &self,
        g: &mut Graph,
        enc: &Encoded,
        query_seq: Var,
        query_pooled: Var,
    ) -> Result<Var> {
        if g.rows(enc.joint.entities) == 0 {
            return Err(Error::NoEntities);
        }
        let stages = if self.spec.mono_grained {
            vec![enc.gde.entities]
        } else {
            vec![enc.joint.entities, self.sit_entities(g, enc, query_seq)]
        };
        self.enhancers.retrieval_head.forward(
            g,
            &self.infuser.alignment,
            &stages,
            query_seq,
            query_pooled,
        )
    }

    /// Staged token representations of a document.
    pub fn token_states(&self, feats: &DocFeatures) -> TokenStates {
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, feats, None);
        let (t2, _) = self.sst(&mut g, &enc);
        TokenStates {
            stage_gde: g.value(enc.gde.tokens).clone(),
            stage_joint: g.value(enc.joint.tokens).clone(),
            stage_decoder: Some(g.value(t2).clone()),
        }
    }

    /// Staged entity representations for one query.
    pub fn entity_states(&self, feats: &DocFeatures, query: &str) -> Result<EntityStates> {
        let ids = self.query_ids(query)?;
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, feats, None);
        let (seq, _) = self.query(&mut g, &ids, None);
        let e2 = self.sit_entities(&mut g, &enc, seq);
        Ok(EntityStates {
            stage_fused: g.value(enc.gde.entities).clone(),
            stage_joint: g.value(enc.joint.entities).clone(),
            stage_decoder: Some(g.value(e2).clone()),
        })
    }

    pub fn encode_query(&self, text: &str) -> Result<QueryEncoding> {
        let ids = self.query_ids(text)?;
        let mut g = Graph::new(&self.store);
        let (seq, pooled) = self.query(&mut g, &ids, None);
        Ok(QueryEncoding {
            sequence: g.value(seq).clone(),
            pooled: g.value(pooled).clone(),
        })
    }

    pub fn alignment(&self, feats: &DocFeatures) -> AlignmentPrediction {
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, feats, None);
        let s = self
            .infuser
            .alignment
            .scores(&mut g, enc.joint.tokens, enc.joint.entities);
        AlignmentPrediction::from_scores(g.value(s).clone())
    }

    /// Gold-label prediction per token.
    pub fn predict_tags(
        &self,
        feats: &DocFeatures,
        cache: Option<&EncodedDoc>,
    ) -> Result<Vec<usize>> {
        if feats.n_tokens() == 0 {
            return Ok(Vec::new());
        }
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, feats, cache);
        let logits = self.tag_logits(&mut g, &enc)?;
        Ok(predict_tags(g.value(logits)))
    }

    /// Retrieval-head pointer distribution for one query.
    pub fn retrieval_distribution(
        &self,
        feats: &DocFeatures,
        query: &str,
        cache: Option<&EncodedDoc>,
    ) -> Result<Vec<f64>> {
        let ids = self.query_ids(query)?;
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, feats, cache);
        let (seq, pooled) = self.query(&mut g, &ids, None);
        let logits = self.retrieval_logits(&mut g, &enc, seq, pooled)?;
        Ok(pointer_distribution(g.value(logits)))
    }

    /// Entity position chosen for a query.
    pub fn retrieve(
        &self,
        feats: &DocFeatures,
        query: &str,
        cache: Option<&EncodedDoc>,
    ) -> Result<usize> {
        Ok(retrieve_entity(
            &self.retrieval_distribution(feats, query, cache)?,
        ))
    }
}
