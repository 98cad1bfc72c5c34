use std::collections::BTreeMap;

use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, StageTag};
use super::optim::Adam;
use super::plan::{AdaptationPlan, TaskMode};
use crate::docmodel::{Document, LabelSpace, Provenance};
use crate::enhancers::{PredictionKind, PredictionRecord};
use crate::error::{Error, Result};
use crate::infuser::{pointer_loss, sds_loss, sst_loss};
use crate::model::{EncodedDoc, Framework, ModelSpec};
use crate::neural::{DocFeatures, Gradients, Graph, Mat, ParamGroup, Var};
use crate::rng;

/// Groups frozen after structural alignment.
pub const ADAPTED_ENCODERS: [ParamGroup; 4] = [
    ParamGroup::TokenEncoder,
    ParamGroup::EntityEncoder,
    ParamGroup::Layout,
    ParamGroup::JointEncoder,
];

const DECODERS: [ParamGroup; 2] = [ParamGroup::TokenDecoder, ParamGroup::EntityDecoder];

const STREAM_SDS: u64 = 0x5D5;
const STREAM_SST: u64 = 0x557;
const STREAM_SIT: u64 = 0x517;
const STREAM_FINETUNE: u64 = 0xF17E;
const STREAM_GUIDANCE: u64 = 0x6D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub stage: String,
    pub loss: f64,
}

/// A trained checkpoint with the loss of every optimizer step.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub losses: Vec<LossRecord>,
}

/// Where fine-tuning starts from.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum FinetuneStart {
    /// Fresh parameters; the result is tagged `F_t`.
    Scratch(ModelSpec),
    /// An adapted `F_n` checkpoint; the result is tagged `F_nt`.
    Adapted(Checkpoint),
}

struct Trainer<'a> {
    plan: &'a AdaptationPlan,
    losses: Vec<LossRecord>,
    step: usize,
}

impl<'a> Trainer<'a> {
    fn new(plan: &'a AdaptationPlan) -> Self {
        Trainer {
            plan,
            losses: Vec::new(),
            step: 0,
        }
    }

    /// Runs `epochs` passes over `n` items in seeded order and returns the
    /// mean loss of the last epoch.
    fn run<F>(
        &mut self,
        model: &mut Framework,
        stage: &str,
        stream: u64,
        n: usize,
        epochs: usize,
        mut loss_fn: F,
    ) -> Result<Option<f64>>
    where
        F: FnMut(&Framework, &mut Graph, usize) -> Result<Option<Var>>,
    {
        let lr = self.plan.learning_rate_for(stage);
        let mut opt = Adam::new(lr, self.plan.grad_clip);
        let dropout = model.config().dropout;
        let mut last = None;
        for epoch in 0..epochs {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::seeded(
                self.plan.seed,
                stream ^ ((epoch as u64) << 32),
            ));
            let (mut sum, mut count) = (0.0, 0usize);
            for batch in order.chunks(self.plan.batch_size) {
                let mut parts: Vec<(f64, Gradients)> = Vec::with_capacity(batch.len());
                for &i in batch {
                    let seed = rng::derive_seed(
                        self.plan.seed,
                        stream ^ ((self.step as u64) << 20) ^ i as u64,
                    );
                    let mut g = Graph::new(&model.store).with_dropout(dropout, seed);
                    if let Some(loss) = loss_fn(model, &mut g, i)? {
                        parts.push((g.scalar(loss), g.backward(loss)));
                    }
                }
                if parts.is_empty() {
                    continue;
                }
                let w = 1.0 / parts.len() as f64;
                let mut grads = Gradients::empty(model.store.len());
                let mut batch_loss = 0.0;
                for (l, gr) in &parts {
                    grads.accumulate(gr, w);
                    batch_loss += l * w;
                }
                opt.step(&mut model.store, &grads);
                self.losses.push(LossRecord {
                    step: self.step,
                    stage: stage.to_string(),
                    loss: batch_loss,
                });
                self.step += 1;
                sum += batch_loss;
                count += 1;
            }
            if count > 0 {
                let mean = sum / count as f64;
                debug!("{stage} epoch {epoch}: mean loss {mean:.5}");
                last = Some(mean);
            }
        }
        Ok(last)
    }
}

fn encoders_frozen(model: &Framework) -> bool {
    ADAPTED_ENCODERS
        .iter()
        .all(|&g| model.store.is_group_frozen(g))
}

fn features(model: &Framework, docs: &[&Document]) -> Result<Vec<DocFeatures>> {
    docs.iter().map(|d| model.features(d)).collect()
}

fn encoder_cache(model: &Framework, feats: &[DocFeatures]) -> Option<Vec<EncodedDoc>> {
    encoders_frozen(model).then(|| feats.iter().map(|f| model.encode_values(f)).collect())
}

/// Token ids, cached query states and target column of each QA pair.
struct Inquiry {
    ids: Vec<usize>,
    cached: Option<Mat>,
    target: usize,
}

fn inquiries(model: &Framework, doc: &Document, cache: bool) -> Result<Vec<Inquiry>> {
    doc.qa_pairs
        .iter()
        .map(|qa| {
            let target = doc.entity_index(qa.target_entity).ok_or_else(|| {
                Error::IdMismatch(format!(
                    "{}: QA target {} is not an entity",
                    doc.id, qa.target_entity
                ))
            })?;
            let ids = model.query_ids(&qa.key_text)?;
            let cached = cache.then(|| model.query_values(&ids));
            Ok(Inquiry {
                ids,
                cached,
                target,
            })
        })
        .collect()
}

fn mean_of(g: &mut Graph, terms: Vec<Var>) -> Option<Var> {
    let k = terms.len();
    let mut it = terms.into_iter();
    let first = it.next()?;
    let total = it.fold(first, |acc, t| g.add(acc, t));
    Some(g.scale(total, 1.0 / k as f64))
}

fn pointer_objective(
    model: &Framework,
    g: &mut Graph,
    feats: &DocFeatures,
    cache: Option<&EncodedDoc>,
    inq: &[Inquiry],
    head: bool,
) -> Result<Option<Var>> {
    if inq.is_empty() {
        return Ok(None);
    }
    let enc = model.encode(g, feats, cache);
    let mut terms = Vec::with_capacity(inq.len());
    for q in inq {
        let (seq, pooled) = model.query(g, &q.ids, q.cached.as_ref());
        let logits = if head {
            model.retrieval_logits(g, &enc, seq, pooled)?
        } else {
            model.sit_logits(g, &enc, seq, pooled)?
        };
        terms.push(pointer_loss(g, logits, q.target)?);
    }
    Ok(mean_of(g, terms))
}

fn missing(stage: &'static str, doc: &Document, what: &'static str) -> Error {
    Error::MissingAnnotation {
        stage,
        doc: doc.id.clone(),
        what,
    }
}

/// Domain adaptation on the synthetic set: structural alignment, freezing
/// of the general encoders, then synthetic tagging and instruction tuning.
pub fn run_adaptation(
    d_n: &[Document],
    spec: ModelSpec,
    plan: &AdaptationPlan,
) -> Result<TrainOutput> {
    plan.validate_adaptation()?;
    let sst_epochs = plan.effective_sst();
    let sit_epochs = plan.effective_sit();
    for d in d_n {
        if d.provenance != Provenance::Synthetic {
            return Err(Error::InvalidConfig(format!("{} is not synthetic", d.id)));
        }
        if (plan.sds_epochs > 0 || sit_epochs > 0) && d.entities.is_empty() && !d.tokens.is_empty()
        {
            return Err(missing(
                if plan.sds_epochs > 0 { "sds" } else { "sit" },
                d,
                "entities",
            ));
        }
        if sst_epochs > 0 && d.tokens.iter().any(|t| t.synthetic_label.is_none()) {
            return Err(missing("sst", d, "synthetic tags"));
        }
    }
    if sit_epochs > 0 {
        if let Some(d) = d_n.iter().find(|d| d.qa_pairs.is_empty()) {
            if d_n.iter().all(|d| d.qa_pairs.is_empty()) {
                return Err(missing("sit", d, "QA pairs"));
            }
        }
    }

    let mut model = Framework::new(spec)?;
    let docs: Vec<&Document> = d_n.iter().filter(|d| !d.tokens.is_empty()).collect();
    let feats = features(&model, &docs)?;
    let mut trainer = Trainer::new(plan);
    let mut metrics = BTreeMap::new();

    if plan.sds_epochs > 0 {
        info!("sds: {} documents, {} epochs", feats.len(), plan.sds_epochs);
        let last = trainer.run(
            &mut model,
            "sds",
            STREAM_SDS,
            feats.len(),
            plan.sds_epochs,
            |m, g, i| {
                let f = &feats[i];
                let enc = m.encode(g, f, None);
                let s = m
                    .infuser
                    .alignment
                    .scores(g, enc.joint.tokens, enc.joint.entities);
                sds_loss(g, s, &f.relation).map(Some)
            },
        )?;
        if let Some(l) = last {
            metrics.insert("sds_loss".into(), l);
        }
    }
    if plan.freeze_after_sds {
        for g in ADAPTED_ENCODERS {
            model.store.freeze(g);
        }
    }
    let cache = encoder_cache(&model, &feats);

    if sst_epochs > 0 {
        info!("sst: {} documents, {} epochs", feats.len(), sst_epochs);
        let labels: Vec<Vec<Option<usize>>> = docs
            .iter()
            .map(|d| d.tokens.iter().map(|t| t.synthetic_label).collect())
            .collect();
        let last = trainer.run(
            &mut model,
            "sst",
            STREAM_SST,
            feats.len(),
            sst_epochs,
            |m, g, i| {
                let enc = m.encode(g, &feats[i], cache.as_ref().map(|c| &c[i]));
                let (_, logits) = m.sst(g, &enc);
                sst_loss(g, logits, &labels[i], &docs[i].id).map(Some)
            },
        )?;
        if let Some(l) = last {
            metrics.insert("sst_loss".into(), l);
        }
    }

    if sit_epochs > 0 {
        let frozen = cache.is_some();
        let inq: Vec<Vec<Inquiry>> = docs
            .iter()
            .map(|d| inquiries(&model, d, frozen))
            .collect::<Result<_>>()?;
        info!(
            "sit: {} inquiries, {} epochs",
            inq.iter().map(Vec::len).sum::<usize>(),
            sit_epochs
        );
        let last = trainer.run(
            &mut model,
            "sit",
            STREAM_SIT,
            feats.len(),
            sit_epochs,
            |m, g, i| {
                pointer_objective(
                    m,
                    g,
                    &feats[i],
                    cache.as_ref().map(|c| &c[i]),
                    &inq[i],
                    false,
                )
            },
        )?;
        if let Some(l) = last {
            metrics.insert("sit_loss".into(), l);
        }
    }
    metrics.insert("steps".into(), trainer.step as f64);

    Ok(TrainOutput {
        checkpoint: Checkpoint {
            model,
            stage: StageTag::Fn,
            plan_hash: plan.hash(),
            metrics,
        },
        losses: trainer.losses,
    })
}

/// `⌈ratio · available⌉`, rejecting ratios outside `(0, 1]` and selections
/// below one document.
pub fn guidance_count(ratio: f64, available: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "guidance ratio {ratio} outside (0, 1]"
        )));
    }
    let exact = ratio * available as f64;
    if exact < 1.0 {
        return Err(Error::EmptyGuidance { ratio, available });
    }
    // guard against 0.1 * 30 = 3.0000000000000004
    Ok(((exact - 1e-9).ceil() as usize).min(available))
}

/// The first `⌈ratio · |d_g|⌉` guidance documents of a seeded shuffle.
pub fn select_guidance(d_g: &[Document], ratio: f64, seed: u64) -> Result<Vec<&Document>> {
    let k = guidance_count(ratio, d_g.len())?;
    let mut order: Vec<usize> = (0..d_g.len()).collect();
    order.shuffle(&mut rng::seeded(seed, STREAM_GUIDANCE));
    Ok(order[..k].iter().map(|&i| &d_g[i]).collect())
}

/// Fine-tuning of the task heads (and decoders unless disabled) on the
/// guidance set.
pub fn run_finetune(
    d_g: &[Document],
    start: FinetuneStart,
    plan: &AdaptationPlan,
    ratio: f64,
) -> Result<TrainOutput> {
    plan.validate()?;
    let docs = select_guidance(d_g, ratio, plan.seed)?;
    let (mut model, stage) = match start {
        FinetuneStart::Scratch(spec) => (Framework::new(spec)?, StageTag::Ft),
        FinetuneStart::Adapted(ckpt) => {
            if ckpt.stage != StageTag::Fn {
                return Err(Error::InvalidConfig(format!(
                    "fine-tuning starts from an adapted checkpoint, got {}",
                    ckpt.stage
                )));
            }
            (ckpt.model, StageTag::Fnt)
        }
    };
    let mode = plan.task_mode;
    for d in &docs {
        if d.provenance != Provenance::Gold {
            return Err(Error::InvalidConfig(format!("{} is not gold", d.id)));
        }
        if mode.fine() && !d.tokens.is_empty() && !d.has_gold_labels() {
            return Err(missing("finetune", d, "gold labels"));
        }
    }
    let n_gold = model.spec.labels.gold.len();
    for d in &docs {
        if let Some(l) = d
            .tokens
            .iter()
            .filter_map(|t| t.gold_label)
            .find(|&l| l >= n_gold)
        {
            return Err(Error::Index {
                index: l,
                len: n_gold,
            });
        }
    }

    let restore = model.store.frozen_groups().clone();
    if !plan.finetune_decoders {
        for g in DECODERS {
            model.store.freeze(g);
        }
    }
    let docs: Vec<&Document> = docs.into_iter().filter(|d| !d.tokens.is_empty()).collect();
    let feats = features(&model, &docs)?;
    let cache = encoder_cache(&model, &feats);
    let inq: Vec<Vec<Inquiry>> = if mode.coarse() {
        docs.iter()
            .map(|d| inquiries(&model, d, cache.is_some()))
            .collect::<Result<_>>()?
    } else {
        docs.iter().map(|_| Vec::new()).collect()
    };
    let labels: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| t.gold_label.unwrap_or(0)).collect())
        .collect();
    info!(
        "finetune {}: {} documents, {} epochs, mode {:?}",
        stage,
        docs.len(),
        plan.finetune_epochs,
        mode
    );

    let mut trainer = Trainer::new(plan);
    let last = trainer.run(
        &mut model,
        "finetune",
        STREAM_FINETUNE,
        feats.len(),
        plan.finetune_epochs,
        |m, g, i| {
            let c = cache.as_ref().map(|c| &c[i]);
            let mut terms = Vec::new();
            if mode.fine() {
                let enc = m.encode(g, &feats[i], c);
                let logits = m.tag_logits(g, &enc)?;
                terms.push(g.cross_entropy(logits, &labels[i]));
            }
            if mode.coarse() {
                if let Some(l) = pointer_objective(m, g, &feats[i], c, &inq[i], true)? {
                    terms.push(l);
                }
            }
            let mut it = terms.into_iter();
            Ok(it.next().map(|first| it.fold(first, |a, t| g.add(a, t))))
        },
    )?;
    model.store.set_frozen(restore);

    let mut metrics = BTreeMap::new();
    if let Some(l) = last {
        metrics.insert("finetune_loss".into(), l);
    }
    metrics.insert("guidance_docs".into(), docs.len() as f64);
    metrics.insert("steps".into(), trainer.step as f64);
    Ok(TrainOutput {
        checkpoint: Checkpoint {
            model,
            stage,
            plan_hash: plan.hash(),
            metrics,
        },
        losses: trainer.losses,
    })
}

fn label_name(space: &LabelSpace, id: usize) -> String {
    space.name_of(id).unwrap_or("?").to_string()
}

/// Deterministic predictions on the inference set: one row per gold-labelled
/// token (fine) and one per QA pair (coarse).
pub fn run_inference(
    d_i: &[Document],
    model: &Framework,
    mode: TaskMode,
) -> Result<Vec<PredictionRecord>> {
    let gold = &model.spec.labels.gold;
    let mut rows = Vec::new();
    for doc in d_i {
        if doc.tokens.is_empty() {
            continue;
        }
        let feats = model.features(doc)?;
        let cache = model.encode_values(&feats);
        if mode.fine() {
            let pred = model.predict_tags(&feats, Some(&cache))?;
            for (i, (t, &p)) in doc.tokens.iter().zip(&pred).enumerate() {
                if let Some(g) = t.gold_label {
                    rows.push(PredictionRecord {
                        kind: PredictionKind::Token,
                        doc_id: doc.id.clone(),
                        index: i,
                        gold: g,
                        pred: p,
                        gold_text: label_name(gold, g),
                        pred_text: label_name(gold, p),
                    });
                }
            }
        }
        if mode.coarse() && !doc.entities.is_empty() {
            for (i, qa) in doc.qa_pairs.iter().enumerate() {
                let target = doc
                    .entity(qa.target_entity)
                    .ok_or_else(|| Error::IdMismatch(format!("{}: unknown QA target", doc.id)))?;
                let pos = model.retrieve(&feats, &qa.key_text, Some(&cache))?;
                let chosen = &doc.entities[pos];
                rows.push(PredictionRecord {
                    kind: PredictionKind::Query,
                    doc_id: doc.id.clone(),
                    index: i,
                    gold: target.id,
                    pred: chosen.id,
                    gold_text: target.text.clone(),
                    pred_text: chosen.text.clone(),
                });
            }
        }
    }
    Ok(rows)
}
