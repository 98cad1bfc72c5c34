//! Scalar objectives that isolate each trainable operation of the
//! framework, for finite-difference gradient checks.

use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::infuser::{pointer_loss, sds_loss, sst_loss};
use crate::model::Framework;
use crate::neural::{DocFeatures, Gradients, Graph, Mat, ParamGroup, ParamStore, Var};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Layout-to-vision projection, through the token and entity stages.
    L2vProjection,
    TokenEncoder,
    /// Entity encoder: visual pathway plus the fusion with pooled tokens.
    Fusion,
    JointEncoder,
    /// Token–entity alignment under the structural loss.
    AlignmentHead,
    TokenDecoder,
    EntityDecoder,
    TagHead,
    RetrievalHead,
    /// Pointer over decoded entities, scored by the alignment projections.
    PointerNet,
}

impl Probe {
    pub const ALL: [Probe; 10] = [
        Probe::L2vProjection,
        Probe::TokenEncoder,
        Probe::Fusion,
        Probe::JointEncoder,
        Probe::AlignmentHead,
        Probe::TokenDecoder,
        Probe::EntityDecoder,
        Probe::TagHead,
        Probe::RetrievalHead,
        Probe::PointerNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Probe::L2vProjection => "l2v_projection",
            Probe::TokenEncoder => "token_encoder",
            Probe::Fusion => "fusion",
            Probe::JointEncoder => "joint_encoder",
            Probe::AlignmentHead => "alignment_head",
            Probe::TokenDecoder => "token_decoder",
            Probe::EntityDecoder => "entity_decoder",
            Probe::TagHead => "tag_head",
            Probe::RetrievalHead => "retrieval_head",
            Probe::PointerNet => "pointer_net",
        }
    }

    /// Parameters whose gradients the probe exercises.
    pub fn groups(self) -> &'static [ParamGroup] {
        match self {
            Probe::L2vProjection => &[ParamGroup::Layout],
            Probe::TokenEncoder => &[ParamGroup::TokenEncoder],
            Probe::Fusion => &[ParamGroup::EntityEncoder],
            Probe::JointEncoder => &[ParamGroup::JointEncoder],
            Probe::AlignmentHead => &[ParamGroup::Alignment],
            Probe::TokenDecoder => &[ParamGroup::TokenDecoder],
            Probe::EntityDecoder => &[ParamGroup::EntityDecoder],
            Probe::TagHead => &[ParamGroup::TagHead],
            Probe::RetrievalHead => &[ParamGroup::RetrievalHead],
            Probe::PointerNet => &[ParamGroup::Alignment, ParamGroup::EntityDecoder],
        }
    }
}

/// One document with everything every probe needs.
#[derive(Debug, Clone)]
pub struct ProbeSample {
    pub feats: DocFeatures,
    pub synthetic_labels: Vec<Option<usize>>,
    pub gold_labels: Vec<usize>,
    pub query: Vec<usize>,
    /// Entity position the query points at.
    pub target: usize,
    /// Seed of the fixed projection used by the encoder probes.
    pub seed: u64,
}

/// `Σ W ⊙ x` with `W` a seeded normal matrix of `x`'s shape, scaled so the
/// result stays O(1) and finite differences keep their precision.
fn projection(g: &mut Graph, x: Var, seed: u64, stream: u64) -> Var {
    let (r, c) = g.shape(x);
    let scale = 1.0 / ((r * c).max(1) as f64).sqrt();
    let mut rng = rng::seeded(seed, stream);
    let w = g.constant(Mat::from_shape_simple_fn((r, c), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    }));
    let p = g.mul(x, w);
    g.sum_all(p)
}

fn objective(model: &Framework, probe: Probe, s: &ProbeSample, g: &mut Graph) -> Result<Var> {
    let enc = model.encode(g, &s.feats, None);
    Ok(match probe {
        Probe::L2vProjection | Probe::TokenEncoder | Probe::Fusion => {
            let a = projection(g, enc.gde.tokens, s.seed, 1);
            let b = projection(g, enc.gde.entities, s.seed, 2);
            g.add(a, b)
        }
        Probe::JointEncoder => {
            let a = projection(g, enc.joint.tokens, s.seed, 3);
            let b = projection(g, enc.joint.entities, s.seed, 4);
            g.add(a, b)
        }
        Probe::AlignmentHead => {
            let scores = model
                .infuser
                .alignment
                .scores(g, enc.joint.tokens, enc.joint.entities);
            sds_loss(g, scores, &s.feats.relation)?
        }
        Probe::TokenDecoder => {
            let (_, logits) = model.sst(g, &enc);
            sst_loss(g, logits, &s.synthetic_labels, "probe")?
        }
        Probe::TagHead => {
            let logits = model.tag_logits(g, &enc)?;
            g.cross_entropy(logits, &s.gold_labels)
        }
        Probe::EntityDecoder | Probe::PointerNet => {
            let (seq, pooled) = model.query(g, &s.query, None);
            let logits = model.sit_logits(g, &enc, seq, pooled)?;
            pointer_loss(g, logits, s.target)?
        }
        Probe::RetrievalHead => {
            let (seq, pooled) = model.query(g, &s.query, None);
            let logits = model.retrieval_logits(g, &enc, seq, pooled)?;
            pointer_loss(g, logits, s.target)?
        }
    })
}

/// Loss and gradients of `probe` with parameters taken from `store`, which
/// must share `model`'s layout. Runs without dropout.
pub fn probe_loss(
    model: &Framework,
    probe: Probe,
    sample: &ProbeSample,
    store: &ParamStore,
) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(store);
    let l = objective(model, probe, sample, &mut g)?;
    Ok((g.scalar(l), g.backward(l)))
}
