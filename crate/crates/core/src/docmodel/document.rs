use std::collections::BTreeSet;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::text::jaccard_similarity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Gold,
    Synthetic,
}

/// Which subset of the collection a document belongs to: `n` is the
/// synthetically annotated set, `g` the guidance set and `i` the inference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "n")]
    Synthetic,
    #[serde(rename = "g")]
    Guidance,
    #[serde(rename = "i")]
    Inference,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Synthetic => "n",
            Split::Guidance => "g",
            Split::Inference => "i",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub text: String,
    pub bbox: BBox,
    pub gold_label: Option<usize>,
    pub synthetic_label: Option<usize>,
    #[serde(rename = "parent")]
    pub parent_entity: Option<usize>,
}

impl Token {
    pub fn new(id: usize, text: impl Into<String>, bbox: BBox) -> Self {
        Token {
            id,
            text: text.into(),
            bbox,
            gold_label: None,
            synthetic_label: None,
            parent_entity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: usize,
    pub text: String,
    pub bbox: BBox,
    pub category: Option<String>,
    pub provenance: Provenance,
}

/// A key/question with the entity that answers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    #[serde(rename = "key")]
    pub key_text: String,
    #[serde(rename = "answer")]
    pub answer_text: String,
    #[serde(rename = "target")]
    pub target_entity: usize,
    #[serde(rename = "score")]
    pub match_score: f64,
}

/// Binary token-by-entity parent matrix. Each token has at most one parent,
/// so rows are stored as the parent column index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationMatrix {
    n_entities: usize,
    parents: Vec<Option<usize>>,
}

impl RelationMatrix {
    pub fn from_parents(n_entities: usize, parents: Vec<Option<usize>>) -> Result<Self> {
        if let Some(bad) = parents.iter().flatten().find(|&&j| j >= n_entities) {
            return Err(Error::DimensionMismatch(format!(
                "parent column {bad} with {n_entities} entities"
            )));
        }
        Ok(RelationMatrix {
            n_entities,
            parents,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.parents.len()
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn get(&self, token: usize, entity: usize) -> bool {
        self.parents[token] == Some(entity)
    }

    pub fn parent_of(&self, token: usize) -> Option<usize> {
        self.parents[token]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn row_sum(&self, token: usize) -> usize {
        usize::from(self.parents[token].is_some())
    }

    /// Child token indices per entity column, in token order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_entities];
        for (i, p) in self.parents.iter().enumerate() {
            if let Some(j) = p {
                out[*j].push(i);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.parents.len(), self.n_entities));
        for (i, p) in self.parents.iter().enumerate() {
            if let Some(j) = p {
                m[[i, *j]] = 1.0;
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_tokens())
            .map(|i| {
                (0..self.n_entities)
                    .map(|j| u8::from(self.get(i, j)))
                    .collect()
            })
            .collect()
    }
}

/// Ordered category names; index 0 is the outside/other category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub name: Provenance,
    categories: Vec<String>,
}

impl LabelSpace {
    pub const OUTSIDE: usize = 0;

    pub fn new(name: Provenance, categories: Vec<String>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::InvalidConfig(
                "label space needs at least the outside category".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for c in &categories {
            if c.is_empty() || !seen.insert(c.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate or empty category {c:?}"
                )));
            }
        }
        Ok(LabelSpace { name, categories })
    }

    pub fn from_strs(name: Provenance, cats: &[&str]) -> Self {
        Self::new(name, cats.iter().map(|s| s.to_string()).collect())
            .expect("static label space is well formed")
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn name_of(&self, id: usize) -> Option<&str> {
        self.categories.get(id).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }
}

/// One page of a visually rich document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DocumentRecord", into = "DocumentRecord")]
pub struct Document {
    pub id: String,
    pub page_width: u32,
    pub page_height: u32,
    pub tokens: Vec<Token>,
    pub entities: Vec<Entity>,
    pub relation_matrix: RelationMatrix,
    pub qa_pairs: Vec<QAPair>,
    pub split: Split,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    page_width: u32,
    page_height: u32,
    split: Split,
    provenance: Provenance,
    tokens: Vec<Token>,
    entities: Vec<Entity>,
    qa_pairs: Vec<QAPair>,
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        let mut doc = Document {
            id: r.id,
            page_width: r.page_width,
            page_height: r.page_height,
            tokens: r.tokens,
            entities: r.entities,
            relation_matrix: RelationMatrix::default(),
            qa_pairs: r.qa_pairs,
            split: r.split,
            provenance: r.provenance,
        };
        doc.relation_matrix = doc.relation_from_parents();
        doc
    }
}

impl From<Document> for DocumentRecord {
    fn from(d: Document) -> Self {
        DocumentRecord {
            id: d.id,
            page_width: d.page_width,
            page_height: d.page_height,
            split: d.split,
            provenance: d.provenance,
            tokens: d.tokens,
            entities: d.entities,
            qa_pairs: d.qa_pairs,
        }
    }
}

impl Document {
    /// Column index of the entity with the given id.
    pub fn entity_index(&self, id: usize) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    pub fn entity(&self, id: usize) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Rebuilds the relation matrix from the tokens' parent links. Links to
    /// unknown entities are dropped (validation reports them).
    pub fn relation_from_parents(&self) -> RelationMatrix {
        let parents = self
            .tokens
            .iter()
            .map(|t| t.parent_entity.and_then(|id| self.entity_index(id)))
            .collect();
        RelationMatrix {
            n_entities: self.entities.len(),
            parents,
        }
    }

    /// Writes `rel` into both the matrix and the tokens' parent links.
    pub fn set_relation(&mut self, rel: RelationMatrix) -> Result<()> {
        if rel.n_tokens() != self.tokens.len() || rel.n_entities() != self.entities.len() {
            return Err(Error::DimensionMismatch(format!(
                "relation {}x{} for document with {} tokens and {} entities",
                rel.n_tokens(),
                rel.n_entities(),
                self.tokens.len(),
                self.entities.len()
            )));
        }
        for (tok, p) in self.tokens.iter_mut().zip(rel.parents()) {
            tok.parent_entity = p.map(|j| self.entities[j].id);
        }
        self.relation_matrix = rel;
        Ok(())
    }

    /// Token texts in document order joined by spaces.
    pub fn context_text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks the structural invariants of the document.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for t in &self.tokens {
            if !ids.insert(t.id) {
                return Err(Error::DimensionMismatch(format!(
                    "duplicate token id {} in {}",
                    t.id, self.id
                )));
            }
            if t.text.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "empty token text in {}",
                    self.id
                )));
            }
            if let Some(p) = t.parent_entity {
                if self.entity_index(p).is_none() {
                    return Err(Error::DimensionMismatch(format!(
                        "token {} references missing entity {p} in {}",
                        t.id, self.id
                    )));
                }
            }
        }
        let mut eids = BTreeSet::new();
        for e in &self.entities {
            if !eids.insert(e.id) {
                return Err(Error::DimensionMismatch(format!(
                    "duplicate entity id {} in {}",
                    e.id, self.id
                )));
            }
        }
        if self.relation_matrix.n_tokens() != self.tokens.len()
            || self.relation_matrix.n_entities() != self.entities.len()
        {
            return Err(Error::DimensionMismatch(format!(
                "relation matrix shape in {}",
                self.id
            )));
        }
        if self.relation_matrix != self.relation_from_parents() {
            return Err(Error::DimensionMismatch(format!(
                "relation matrix disagrees with parent links in {}",
                self.id
            )));
        }
        if self.provenance == Provenance::Gold
            && !self.entities.is_empty()
            && self.tokens.iter().any(|t| t.parent_entity.is_none())
        {
            return Err(Error::DimensionMismatch(format!(
                "gold document {} has an orphan token",
                self.id
            )));
        }
        for q in &self.qa_pairs {
            let Some(target) = self.entity(q.target_entity) else {
                return Err(Error::DimensionMismatch(format!(
                    "qa target {} missing in {}",
                    q.target_entity, self.id
                )));
            };
            let expected = jaccard_similarity(&q.answer_text, &target.text);
            if (expected - q.match_score).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "qa score {} != jaccard {expected} in {}",
                    q.match_score, self.id
                )));
            }
        }
        Ok(())
    }

    /// Checks that every present label indexes its label space.
    pub fn validate_labels(&self, gold: &LabelSpace, synthetic: &LabelSpace) -> Result<()> {
        for t in &self.tokens {
            if t.gold_label.is_some_and(|l| l >= gold.len())
                || t.synthetic_label.is_some_and(|l| l >= synthetic.len())
            {
                return Err(Error::Index {
                    index: t.gold_label.or(t.synthetic_label).unwrap_or(0),
                    len: gold.len().max(synthetic.len()),
                });
            }
        }
        Ok(())
    }

    pub fn has_gold_labels(&self) -> bool {
        !self.tokens.is_empty() && self.tokens.iter().all(|t| t.gold_label.is_some())
    }
}

/// The three subsets of a document collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollectionSplit {
    pub d_n: Vec<Document>,
    pub d_g: Vec<Document>,
    pub d_i: Vec<Document>,
}

impl CollectionSplit {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for d in self.d_n.iter().chain(&self.d_g).chain(&self.d_i) {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::IdMismatch(format!(
                    "document {} in two subsets",
                    d.id
                )));
            }
        }
        if self
            .d_n
            .iter()
            .any(|d| d.provenance != Provenance::Synthetic)
            || self
                .d_g
                .iter()
                .chain(&self.d_i)
                .any(|d| d.provenance != Provenance::Gold)
        {
            return Err(Error::InvalidConfig("subset provenance mismatch".into()));
        }
        Ok(())
    }
}
