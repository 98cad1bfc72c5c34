#![allow(dead_code)]

use docadapt_core::docmodel::{assign_splits, Document, LabelSpaces, Split};
use docadapt_core::infuser::SitMemory;
use docadapt_core::model::{Framework, ModelSpec};
use docadapt_core::neural::EncoderConfig;
use docadapt_core::probes::ProbeSample;
use docadapt_core::synthgen::{
    annotate_collection, generate_corpus, gold_label_space, rule_tags, synthetic_label_space,
    AnnotateConfig, CorpusSpec, DocumentKind, RuleOracle,
};

pub fn labels() -> LabelSpaces {
    LabelSpaces {
        gold: gold_label_space(DocumentKind::Form),
        synthetic: synthetic_label_space(),
    }
}

pub fn tiny_encoder(seed: u64) -> EncoderConfig {
    EncoderConfig {
        vocab_size: 400,
        hidden_dim: 8,
        n_layers: 1,
        n_heads: 2,
        dropout: 0.0,
        seed,
        decoder_layers: 1,
        conv_channels: [2, 3],
        ..EncoderConfig::default()
    }
}

pub fn forms(n: usize, seed: u64) -> Vec<Document> {
    generate_corpus(&CorpusSpec::new(n, DocumentKind::Form, seed)).unwrap()
}

/// Small model plus a form document carrying synthetic tags and one query.
pub fn probe_setup(seed: u64) -> (Framework, ProbeSample) {
    let docs = forms(1, seed);
    let doc = &docs[0];
    let spec = ModelSpec::from_corpus(&docs, labels(), tiny_encoder(seed), SitMemory::QueryTokens);
    let model = Framework::new(spec).unwrap();
    let feats = model.features(doc).unwrap();
    let synthetic = rule_tags(doc, &model.spec.labels.synthetic);
    let qa = &doc.qa_pairs[0];
    let sample = ProbeSample {
        feats,
        synthetic_labels: synthetic.into_iter().map(Some).collect(),
        gold_labels: doc.tokens.iter().map(|t| t.gold_label.unwrap()).collect(),
        query: model.query_ids(&qa.key_text).unwrap(),
        target: doc.entity_index(qa.target_entity).unwrap(),
        seed,
    };
    (model, sample)
}

/// Annotated toy corpus split into synthetic, guidance and inference sets,
/// plus a tiny model spec over it.
pub struct Splits {
    pub d_n: Vec<Document>,
    pub d_g: Vec<Document>,
    pub d_i: Vec<Document>,
    pub spec: ModelSpec,
}

pub fn splits(n_n: usize, n_g: usize, n_i: usize, seed: u64) -> Splits {
    let total = n_n + n_g + n_i;
    let mut docs = forms(total, seed);
    for (i, s) in assign_splits(total, n_n, n_g, n_i, seed).unwrap() {
        docs[i].split = s;
    }
    let labels = labels();
    let mut cfg = AnnotateConfig::default();
    cfg.layout_noise.seed = seed;
    let all = annotate_collection(&docs, &cfg, &RuleOracle, &labels.synthetic)
        .unwrap()
        .documents;
    let pick = |s: Split| {
        all.iter()
            .filter(|d| d.split == s)
            .cloned()
            .collect::<Vec<_>>()
    };
    let spec = ModelSpec::from_corpus(&all, labels, tiny_encoder(seed), SitMemory::QueryTokens);
    Splits {
        d_n: pick(Split::Synthetic),
        d_g: pick(Split::Guidance),
        d_i: pick(Split::Inference),
        spec,
    }
}
