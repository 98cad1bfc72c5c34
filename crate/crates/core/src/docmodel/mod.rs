//! Documents, tokens, entities, geometry and collection splits.

mod document;
mod geometry;
pub mod io;
mod relation;
mod split;
mod text;

pub use document::{
    CollectionSplit, Document, Entity, LabelSpace, Provenance, QAPair, RelationMatrix, Split, Token,
};
pub use geometry::{BBox, COORD_MAX};
pub use io::LabelSpaces;
pub use relation::compute_relation_matrix;
pub use split::{assign_splits, split_collection, strip_gold};
pub use text::{jaccard_similarity, normalize_word, word_set};
