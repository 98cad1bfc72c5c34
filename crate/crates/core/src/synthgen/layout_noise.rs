//! Simulated off-the-shelf layout annotation: entity boxes are merged, split
//! and displaced and entity text is re-read with OCR-like noise.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::docmodel::{
    compute_relation_matrix, jaccard_similarity, BBox, Document, Entity, Provenance, COORD_MAX,
};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutNoiseConfig {
    pub target_mean_iou: f64,
    pub text_drop_rate: f64,
    pub merge_split_rate: f64,
    pub seed: u64,
}

impl Default for LayoutNoiseConfig {
    fn default() -> Self {
        LayoutNoiseConfig {
            target_mean_iou: 0.3,
            text_drop_rate: 0.1,
            merge_split_rate: 0.1,
            seed: 0,
        }
    }
}

impl LayoutNoiseConfig {
    pub fn identity() -> Self {
        LayoutNoiseConfig {
            target_mean_iou: 1.0,
            text_drop_rate: 0.0,
            merge_split_rate: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_mean_iou > 0.0 && self.target_mean_iou <= 1.0) {
            return Err(Error::InvalidConfig(
                "target_mean_iou must lie in (0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.text_drop_rate) {
            return Err(Error::InvalidConfig(
                "text_drop_rate must lie in [0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.merge_split_rate) {
            return Err(Error::InvalidConfig(
                "merge_split_rate must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationQualityStats {
    pub doc_ids: Vec<String>,
    pub per_doc_iou: Vec<f64>,
    pub per_doc_text_jaccard: Vec<f64>,
    pub mean_iou: f64,
    pub mean_text_jaccard: f64,
}

/// Spread of the per-entity IoU targets around the document target.
const IOU_SPREAD: f64 = 0.25;
const MIN_IOU: f64 = 0.02;

/// Box with the same size displaced along x or y so that its IoU with `b`
/// is `u`, or `b` shrunk to area fraction `u` when no displacement fits on
/// the page.
fn displace(b: &BBox, u: f64, r: &mut Rng) -> BBox {
    if u >= 1.0 {
        return *b;
    }
    // Shifting by a fraction f of the extent gives IoU (1-f)/(1+f).
    let f = (1.0 - u) / (1.0 + u);
    let horizontal = r.random_bool(0.7);
    let (lo, hi, extent) = if horizontal {
        (b.x0, b.x1, b.width())
    } else {
        (b.y0, b.y1, b.height())
    };
    let shift = (f * extent as f64).round() as i32;
    let forward_fits = hi + shift <= COORD_MAX;
    let backward_fits = lo - shift >= 0;
    let dir = match (forward_fits, backward_fits) {
        (true, true) => {
            if r.random_bool(0.5) {
                1
            } else {
                -1
            }
        }
        (true, false) => 1,
        (false, true) => -1,
        (false, false) => 0,
    };
    if dir != 0 && shift > 0 {
        let d = dir * shift;
        return if horizontal {
            BBox::clamped(
                (b.x0 + d) as i64,
                b.y0 as i64,
                (b.x1 + d) as i64,
                b.y1 as i64,
            )
        } else {
            BBox::clamped(
                b.x0 as i64,
                (b.y0 + d) as i64,
                b.x1 as i64,
                (b.y1 + d) as i64,
            )
        };
    }
    // Shrink the width to a fraction u, anchored at a random offset.
    let w = b.width() as f64;
    let nw = (u * w).round() as i64;
    let slack = b.width() - nw;
    let off = if slack > 0 {
        r.random_range(0..=slack)
    } else {
        0
    };
    let x0 = b.x0 as i64 + off;
    BBox::clamped(x0, b.y0 as i64, x0 + nw, b.y1 as i64)
}

/// Splits a box into left and right parts at a random column.
fn split_box(b: &BBox, r: &mut Rng) -> (BBox, BBox) {
    let w = b.width();
    let cut = if w >= 4 {
        b.x0 as i64 + r.random_range(w / 4..=3 * w / 4)
    } else {
        b.x0 as i64 + w / 2
    };
    (
        BBox::clamped(b.x0 as i64, b.y0 as i64, cut, b.y1 as i64),
        BBox::clamped(cut, b.y0 as i64, b.x1 as i64, b.y1 as i64),
    )
}

const OCR_CONFUSIONS: [(char, char); 10] = [
    ('0', 'O'),
    ('O', '0'),
    ('1', 'l'),
    ('l', '1'),
    ('5', 'S'),
    ('S', '5'),
    ('8', 'B'),
    ('e', 'c'),
    ('a', 'o'),
    ('i', 'l'),
];

fn corrupt_word(w: &str, r: &mut Rng) -> String {
    let chars: Vec<char> = w.chars().collect();
    let candidates: Vec<usize> = (0..chars.len())
        .filter(|&i| OCR_CONFUSIONS.iter().any(|(a, _)| *a == chars[i]))
        .collect();
    if candidates.is_empty() {
        return w.to_string();
    }
    let pick = candidates[r.random_range(0..candidates.len())];
    let mut out = chars.clone();
    out[pick] = OCR_CONFUSIONS
        .iter()
        .find(|(a, _)| *a == chars[pick])
        .map(|(_, b)| *b)
        .expect("candidate has a confusion");
    out.into_iter().collect()
}

/// Best IoU of each gold box against a set of candidate boxes.
fn best_ious(gold: &[BBox], candidates: &[BBox]) -> Vec<f64> {
    gold.iter()
        .map(|g| candidates.iter().map(|c| g.iou(c)).fold(0.0, f64::max))
        .collect()
}

/// Returns a synthetic-provenance copy of `doc` whose entities imitate the
/// output of a layout analysis tool.
pub fn perturb_layout_annotations(doc: &Document, cfg: &LayoutNoiseConfig) -> Result<Document> {
    cfg.validate()?;
    let mut r = rng::seeded(cfg.seed, 0x1A70 ^ rng::stable_hash(&doc.id));
    let gold: Vec<BBox> = doc.entities.iter().map(|e| e.bbox).collect();

    // Structural errors: merge with the next entity or split in two.
    let mut structural: Vec<(BBox, Option<String>)> = Vec::with_capacity(gold.len());
    let mut j = 0;
    while j < doc.entities.len() {
        let e = &doc.entities[j];
        let roll: f64 = if cfg.merge_split_rate > 0.0 {
            r.random()
        } else {
            1.0
        };
        if roll < cfg.merge_split_rate / 2.0 && j + 1 < doc.entities.len() {
            structural.push((e.bbox.union(&doc.entities[j + 1].bbox), e.category.clone()));
            j += 2;
            continue;
        }
        if roll < cfg.merge_split_rate {
            let (a, b) = split_box(&e.bbox, &mut r);
            structural.push((a, e.category.clone()));
            structural.push((b, e.category.clone()));
        } else {
            structural.push((e.bbox, e.category.clone()));
        }
        j += 1;
    }

    // Displacement, with the document-level target compensated for the
    // overlap already lost to merges and splits.
    let boxes: Vec<BBox> = structural.iter().map(|(b, _)| *b).collect();
    let s = best_ious(&gold, &boxes);
    let s_mean = if s.is_empty() {
        1.0
    } else {
        s.iter().sum::<f64>() / s.len() as f64
    };
    let base = (cfg.target_mean_iou / s_mean.max(1e-6)).min(1.0);
    let spread = Normal::new(0.0, IOU_SPREAD).expect("valid spread");
    let jittered: Vec<BBox> = boxes
        .iter()
        .map(|b| {
            if base >= 1.0 {
                return *b;
            }
            let z: f64 = spread.sample(&mut r);
            let u = (base * (z - IOU_SPREAD * IOU_SPREAD / 2.0).exp()).clamp(MIN_IOU, 1.0);
            displace(b, u, &mut r)
        })
        .collect();

    // Re-read text: tokens whose centres fall inside each box, with word
    // drops and character confusions.
    let mut entities = Vec::with_capacity(jittered.len());
    for (k, (bbox, (_, category))) in jittered.iter().zip(&structural).enumerate() {
        let mut words = Vec::new();
        for t in &doc.tokens {
            let (cx, cy) = t.bbox.center();
            if !bbox.contains_point(cx, cy) {
                continue;
            }
            if cfg.text_drop_rate > 0.0 && r.random_bool(cfg.text_drop_rate) {
                continue;
            }
            if cfg.text_drop_rate > 0.0 && r.random_bool(cfg.text_drop_rate / 2.0) {
                words.push(corrupt_word(&t.text, &mut r));
            } else {
                words.push(t.text.clone());
            }
        }
        entities.push(Entity {
            id: k,
            text: words.join(" "),
            bbox: *bbox,
            category: category.clone(),
            provenance: Provenance::Synthetic,
        });
    }

    let mut out = doc.clone();
    for t in &mut out.tokens {
        t.gold_label = None;
        t.synthetic_label = None;
    }
    out.qa_pairs.clear();
    out.provenance = Provenance::Synthetic;
    out.entities = entities;
    let rel = compute_relation_matrix(&out.tokens, &out.entities)?;
    out.set_relation(rel)?;
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per gold entity, the best-IoU synthetic entity is its match; reports the
/// mean IoU and the mean text Jaccard of matched pairs per document, and the
/// corpus means of those per-document values.
pub fn measure_annotation_quality(
    synthetic: &[Document],
    gold: &[Document],
) -> Result<AnnotationQualityStats> {
    if synthetic.len() != gold.len() {
        return Err(Error::IdMismatch(format!(
            "{} synthetic documents against {} gold documents",
            synthetic.len(),
            gold.len()
        )));
    }
    let mut stats = AnnotationQualityStats {
        doc_ids: Vec::new(),
        per_doc_iou: Vec::new(),
        per_doc_text_jaccard: Vec::new(),
        mean_iou: 0.0,
        mean_text_jaccard: 0.0,
    };
    for (s, g) in synthetic.iter().zip(gold) {
        if s.id != g.id {
            return Err(Error::IdMismatch(format!("{} vs {}", s.id, g.id)));
        }
        if g.entities.is_empty() {
            continue;
        }
        let mut ious = Vec::with_capacity(g.entities.len());
        let mut texts = Vec::with_capacity(g.entities.len());
        for ge in &g.entities {
            let best = s
                .entities
                .iter()
                .map(|se| (ge.bbox.iou(&se.bbox), se))
                .fold(None::<(f64, &Entity)>, |acc, cur| match acc {
                    Some(a) if a.0 >= cur.0 => Some(a),
                    _ => Some(cur),
                });
            match best {
                Some((iou, se)) => {
                    ious.push(iou);
                    texts.push(jaccard_similarity(&ge.text, &se.text));
                }
                None => {
                    ious.push(0.0);
                    texts.push(0.0);
                }
            }
        }
        stats.doc_ids.push(g.id.clone());
        stats.per_doc_iou.push(mean(&ious));
        stats.per_doc_text_jaccard.push(mean(&texts));
    }
    stats.mean_iou = mean(&stats.per_doc_iou);
    stats.mean_text_jaccard = mean(&stats.per_doc_text_jaccard);
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_corpus, CorpusSpec, DocumentKind};

    #[test]
    fn displacement_hits_requested_iou() {
        let mut r = rng::seeded(1, 1);
        let b = BBox::new(100, 100, 400, 140).unwrap();
        for &u in &[0.9, 0.5, 0.3, 0.1] {
            let d = displace(&b, u, &mut r);
            assert!((b.iou(&d) - u).abs() < 0.03, "u={u} got {}", b.iou(&d));
        }
    }

    #[test]
    fn identity_noise_keeps_entities() {
        let docs = generate_corpus(&CorpusSpec::new(3, DocumentKind::Form, 4)).unwrap();
        for d in &docs {
            let p = perturb_layout_annotations(d, &LayoutNoiseConfig::identity()).unwrap();
            assert_eq!(p.entities.len(), d.entities.len());
            for (a, b) in p.entities.iter().zip(&d.entities) {
                assert_eq!(a.bbox, b.bbox);
                assert_eq!(a.text, b.text);
                assert_eq!(a.provenance, Provenance::Synthetic);
            }
            assert_eq!(p.relation_matrix, d.relation_matrix);
            assert!(p.tokens.iter().all(|t| t.gold_label.is_none()));
            let q = measure_annotation_quality(&[p], std::slice::from_ref(d)).unwrap();
            assert_eq!(q.mean_iou, 1.0);
            assert_eq!(q.mean_text_jaccard, 1.0);
        }
    }

    #[test]
    fn disjoint_boxes_score_zero() {
        let docs = generate_corpus(&CorpusSpec::new(1, DocumentKind::Form, 4)).unwrap();
        let mut s = docs[0].clone();
        for e in &mut s.entities {
            e.bbox = BBox::new(0, 995, 1, 1000).unwrap();
        }
        let q = measure_annotation_quality(&[s], &docs).unwrap();
        assert_eq!(q.mean_iou, 0.0);
    }

    #[test]
    fn id_mismatch_is_reported() {
        let docs = generate_corpus(&CorpusSpec::new(2, DocumentKind::Form, 4)).unwrap();
        assert!(matches!(
            measure_annotation_quality(&docs[..1], &docs[1..]),
            Err(Error::IdMismatch(_))
        ));
    }
}
