use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::docmodel::{normalize_word, Document};

pub const UNK: usize = 0;
pub const UNK_TEXT: &str = "[UNK]";

/// Word-level vocabulary. Id 0 is the unknown word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocab { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Most frequent normalized words first (ties alphabetical), capped at
    /// `capacity` entries including the unknown word.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>, capacity: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            for t in &doc.tokens {
                let w = normalize_word(&t.text);
                if !w.is_empty() {
                    *counts.entry(w).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut words = vec![UNK_TEXT.to_string()];
        words.extend(
            ranked
                .into_iter()
                .take(capacity.saturating_sub(1))
                .map(|(w, _)| w),
        );
        Vocab::from(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index
            .get(&normalize_word(word))
            .copied()
            .unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    /// Ids of the whitespace-separated words of `text`.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_and_known() {
        let v = Vocab::from(vec![UNK_TEXT.to_string(), "total".into(), "00.00".into()]);
        assert_eq!(v.encode("TOTAL: 12.50 zebra"), vec![1, 2, 0]);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocab::from(vec![UNK_TEXT.to_string(), "a".into()]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["[UNK]","a"]"#);
        assert_eq!(serde_json::from_str::<Vocab>(&s).unwrap(), v);
    }
}
