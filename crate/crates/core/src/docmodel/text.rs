use std::collections::BTreeSet;

/// Case-folded whitespace tokens.
pub fn word_set(s: &str) -> BTreeSet<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

/// Jaccard similarity of the case-folded whitespace token sets of `a` and
/// `b`. Two empty strings are identical (1.0); exactly one empty gives 0.0.
pub fn jaccard_similarity(a: &str, b: &str) -> f64 {
    let sa = word_set(a);
    let sb = word_set(b);
    match (sa.is_empty(), sb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

/// Normalizes a surface word for vocabulary lookup: lowercase, surrounding
/// punctuation stripped, digits collapsed to `0`.
pub fn normalize_word(w: &str) -> String {
    let lower = w.to_lowercase();
    let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
    let base = if trimmed.is_empty() {
        lower.as_str()
    } else {
        trimmed
    };
    base.chars()
        .map(|c| if c.is_ascii_digit() { '0' } else { c })
        .collect()
}
