//! End-to-end synthetic annotation of the `D_n` subset.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::docmodel::{Document, LabelSpace, Provenance, Split};
use crate::error::{Error, Result};

use super::inquiries::generate_synthetic_inquiries;
use super::layout_noise::{perturb_layout_annotations, LayoutNoiseConfig};
use super::provider::{AnnotationProvider, RuleOracle};
use super::tags::generate_synthetic_tags;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateConfig {
    pub layout_noise: LayoutNoiseConfig,
    pub max_pairs: usize,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig {
            layout_noise: LayoutNoiseConfig::default(),
            max_pairs: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub doc: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AnnotateOutcome {
    /// All documents in input order; failed `D_n` documents are left out.
    pub documents: Vec<Document>,
    pub failures: Vec<AnnotationFailure>,
}

/// Applies `f` to every item with at most `workers` running at once and
/// returns results in input order.
pub fn bounded_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn annotate_one(
    doc: &Document,
    cfg: &AnnotateConfig,
    tagger: &dyn AnnotationProvider,
    inquirer: &dyn AnnotationProvider,
    synthetic_space: &LabelSpace,
) -> Result<Document> {
    let doc = if doc.provenance == Provenance::Gold {
        perturb_layout_annotations(doc, &cfg.layout_noise)?
    } else {
        doc.clone()
    };
    let doc = generate_synthetic_tags(&doc, tagger, synthetic_space)?;
    if doc.entities.is_empty() {
        return Ok(doc);
    }
    generate_synthetic_inquiries(&doc, inquirer, cfg.max_pairs)
}

/// Synthetic layout annotation, sequence tags and inquiries for every `D_n`
/// document. Documents of the other subsets pass through untouched. Tags
/// come from the rule oracle when `provider` cannot tag. Provider failures
/// are collected, logged and reported; the failed document is skipped.
pub fn annotate_collection(
    docs: &[Document],
    cfg: &AnnotateConfig,
    provider: &dyn AnnotationProvider,
    synthetic_space: &LabelSpace,
) -> Result<AnnotateOutcome> {
    cfg.layout_noise.validate()?;
    let oracle = RuleOracle;
    let tagger: &dyn AnnotationProvider = if provider.capabilities().tags {
        provider
    } else {
        &oracle
    };
    let results = bounded_map(docs, provider.max_concurrency(), |d| {
        if d.split != Split::Synthetic {
            return Ok(d.clone());
        }
        annotate_one(d, cfg, tagger, provider, synthetic_space)
    });
    let mut out = AnnotateOutcome {
        documents: Vec::with_capacity(docs.len()),
        failures: Vec::new(),
    };
    for (d, r) in docs.iter().zip(results) {
        match r {
            Ok(doc) => out.documents.push(doc),
            Err(e @ Error::Provider { .. }) => {
                log::warn!("skipping {}: {e}", d.id);
                out.failures.push(AnnotationFailure {
                    doc: d.id.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_map_keeps_order() {
        let items: Vec<usize> = (0..37).collect();
        let out = bounded_map(&items, 4, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
