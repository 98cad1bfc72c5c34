//! Coarse machine-generated token tags.

use crate::docmodel::{Document, LabelSpace, Provenance};
use crate::error::{Error, Result};

use super::provider::AnnotationProvider;

pub const SYNTHETIC_CATEGORIES: [&str; 6] = ["other", "header", "key", "amount", "date", "text"];

pub fn synthetic_label_space() -> LabelSpace {
    LabelSpace::from_strs(Provenance::Synthetic, &SYNTHETIC_CATEGORIES)
}

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Numbers with optional currency sign, thousands separators, decimals,
/// percent sign or quantity suffix: `12.50`, `$3`, `1,234`, `5.2%`, `2x`.
pub fn looks_like_amount(w: &str) -> bool {
    let w = w.strip_prefix('$').unwrap_or(w);
    let w = w
        .strip_suffix('%')
        .or_else(|| w.strip_suffix('x'))
        .unwrap_or(w);
    !w.is_empty()
        && w.chars().next().is_some_and(|c| c.is_ascii_digit())
        && w.chars().last().is_some_and(|c| c.is_ascii_digit())
        && w.chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
        && !w.contains("..")
}

/// `dd/mm/yyyy`, `dd-mm-yy` or an abbreviated month name.
pub fn looks_like_date(w: &str) -> bool {
    let lower = w.to_lowercase();
    if MONTHS.iter().any(|m| lower.trim_end_matches('.') == *m) {
        return true;
    }
    for sep in ['/', '-'] {
        let parts: Vec<&str> = w.split(sep).collect();
        if parts.len() == 3
            && parts
                .iter()
                .all(|p| !p.is_empty() && p.len() <= 4 && p.chars().all(|c| c.is_ascii_digit()))
        {
            return true;
        }
    }
    false
}

/// Rule-based tagger: header entities → header; within an entity, words up
/// to the first one ending in `:` → key; then date and amount patterns;
/// remaining words in an entity → text; orphan tokens → other.
pub fn rule_tags(doc: &Document, space: &LabelSpace) -> Vec<usize> {
    let id = |name: &str| space.id_of(name).unwrap_or(LabelSpace::OUTSIDE);
    let mut out = vec![id("other"); doc.tokens.len()];
    for (j, kids) in doc.relation_matrix.children().iter().enumerate() {
        let header = doc.entities[j].category.as_deref() == Some("header");
        let key_end = kids.iter().position(|&i| doc.tokens[i].text.ends_with(':'));
        for (pos, &i) in kids.iter().enumerate() {
            let w = doc.tokens[i].text.as_str();
            out[i] = if header {
                id("header")
            } else if key_end.is_some_and(|k| pos <= k) {
                id("key")
            } else if looks_like_date(w) {
                id("date")
            } else if looks_like_amount(w) {
                id("amount")
            } else {
                id("text")
            };
        }
    }
    out
}

/// Assigns a synthetic label to every token using `provider`.
pub fn generate_synthetic_tags(
    doc: &Document,
    provider: &dyn AnnotationProvider,
    synthetic_space: &LabelSpace,
) -> Result<Document> {
    if doc.tokens.is_empty() {
        return Ok(doc.clone());
    }
    if !provider.capabilities().tags {
        return Err(Error::InvalidConfig(format!(
            "provider {} cannot produce sequence tags",
            provider.name()
        )));
    }
    let labels = provider.tag_tokens(doc, synthetic_space)?;
    if labels.len() != doc.tokens.len() {
        return Err(Error::Provider {
            doc: doc.id.clone(),
            reason: format!("{} tags for {} tokens", labels.len(), doc.tokens.len()),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= synthetic_space.len()) {
        return Err(Error::Provider {
            doc: doc.id.clone(),
            reason: format!("tag {bad} outside the synthetic label space"),
        });
    }
    let mut out = doc.clone();
    for (t, l) in out.tokens.iter_mut().zip(labels) {
        t.synthetic_label = Some(l);
    }
    Ok(out)
}
