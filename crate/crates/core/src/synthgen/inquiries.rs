//! Machine-generated key/answer pairs matched to entities.

use crate::docmodel::{jaccard_similarity, Document, QAPair, Token};
use crate::error::{Error, Result};

use super::provider::AnnotationProvider;
use super::tags::looks_like_amount;

/// Pairs whose best entity match falls below this Jaccard score are dropped.
pub const MIN_MATCH_SCORE: f64 = 0.2;

/// Groups tokens into text lines by vertical centre, in token order.
pub fn text_lines(tokens: &[Token]) -> Vec<Vec<&Token>> {
    let mut lines: Vec<Vec<&Token>> = Vec::new();
    for t in tokens {
        let (_, cy) = t.bbox.center();
        let same = lines.last().is_some_and(|line| {
            let prev = line[line.len() - 1];
            let (_, py) = prev.bbox.center();
            let tol = (prev.bbox.height().max(t.bbox.height()) as f64 / 2.0).max(1.0);
            (cy - py).abs() <= tol
        });
        if same {
            lines.last_mut().expect("checked").push(t);
        } else {
            lines.push(vec![t]);
        }
    }
    lines
}

/// Candidate `(key, answer)` splits of each line: words up to the first one
/// ending in `:`, or a trailing amount after a non-numeric label.
pub fn key_value_lines(doc: &Document) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for line in text_lines(&doc.tokens) {
        let words: Vec<&str> = line.iter().map(|t| t.text.as_str()).collect();
        let split = match words.iter().position(|w| w.ends_with(':')) {
            Some(k) if k + 1 < words.len() => Some(k + 1),
            Some(_) => None,
            None => {
                let n = words.len();
                let numeric_tail = n >= 2 && looks_like_amount(words[n - 1]);
                let label_head = words[..n - 1].iter().all(|w| !looks_like_amount(w));
                (numeric_tail && label_head).then_some(n - 1)
            }
        };
        if let Some(k) = split {
            let key = words[..k]
                .join(" ")
                .trim_end_matches(':')
                .trim()
                .to_string();
            let answer = words[k..].join(" ");
            if !key.is_empty() {
                out.push((key, answer));
            }
        }
    }
    out
}

/// Rule-oracle proposals: each key as written, then as a question.
pub fn rule_inquiries(doc: &Document, max_pairs: usize) -> Vec<(String, String)> {
    let base = key_value_lines(doc);
    let questions = base
        .iter()
        .map(|(k, a)| (format!("what is the {}?", k.to_lowercase()), a.clone()));
    base.iter()
        .cloned()
        .chain(questions)
        .take(max_pairs)
        .collect()
}

/// Index of the entity whose text best matches `answer` (ties → lowest
/// index) with its score.
pub fn best_entity_match(doc: &Document, answer: &str) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, e) in doc.entities.iter().enumerate() {
        let s = jaccard_similarity(answer, &e.text);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    best
}

/// Matches proposed `(key, answer)` pairs to entities. Keeps at most
/// `max_pairs` pairs scoring at least [`MIN_MATCH_SCORE`].
pub fn attach_inquiries(
    doc: &Document,
    proposals: Vec<(String, String)>,
    max_pairs: usize,
) -> Result<Document> {
    if doc.entities.is_empty() {
        return Err(Error::NoEntities);
    }
    let mut out = doc.clone();
    out.qa_pairs.clear();
    for (key, answer) in proposals {
        if out.qa_pairs.len() >= max_pairs {
            break;
        }
        let (j, score) = best_entity_match(doc, &answer).expect("entities present");
        if score < MIN_MATCH_SCORE {
            continue;
        }
        out.qa_pairs.push(QAPair {
            key_text: key,
            answer_text: answer,
            target_entity: doc.entities[j].id,
            match_score: score,
        });
    }
    Ok(out)
}

pub fn generate_synthetic_inquiries(
    doc: &Document,
    provider: &dyn AnnotationProvider,
    max_pairs: usize,
) -> Result<Document> {
    if doc.entities.is_empty() {
        return Err(Error::NoEntities);
    }
    if !provider.capabilities().inquiries {
        return Err(Error::InvalidConfig(format!(
            "provider {} cannot produce inquiries",
            provider.name()
        )));
    }
    let proposals = provider.propose_inquiries(doc, max_pairs)?;
    attach_inquiries(doc, proposals, max_pairs)
}
