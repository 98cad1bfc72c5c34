//! Synthetic corpora and synthetic annotations: layout annotation with a
//! calibrated error profile, coarse sequence tags, key/answer inquiries and
//! guidance-label corruption.

mod corpus;
mod inquiries;
mod label_noise;
mod layout_noise;
mod pipeline;
mod provider;
mod tags;

pub use corpus::{generate_corpus, gold_label_space, CorpusSpec, DocumentKind, OUTSIDE_LABEL};
pub use inquiries::{
    attach_inquiries, best_entity_match, generate_synthetic_inquiries, key_value_lines,
    rule_inquiries, text_lines, MIN_MATCH_SCORE,
};
pub use label_noise::{
    corrupt_guidance_labels, corrupt_guidance_labels_with_stats, tail_probability, CorruptionStats,
    LabelNoiseConfig, NoiseMode,
};
pub use layout_noise::{
    measure_annotation_quality, perturb_layout_annotations, AnnotationQualityStats,
    LayoutNoiseConfig,
};
pub use pipeline::{
    annotate_collection, bounded_map, AnnotateConfig, AnnotateOutcome, AnnotationFailure,
};
pub use provider::{
    parse_value, prompt, AnnotationProvider, Capabilities, RemoteConfig, RemoteProvider,
    RuleOracle, KEY_ENV, URL_ENV,
};
pub use tags::{
    generate_synthetic_tags, looks_like_amount, looks_like_date, rule_tags, synthetic_label_space,
    SYNTHETIC_CATEGORIES,
};
