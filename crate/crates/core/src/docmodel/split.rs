use rand::seq::SliceRandom;

use super::document::{CollectionSplit, Document, Provenance, RelationMatrix, Split};
use crate::error::{Error, Result};
use crate::rng;

const SPLIT_STREAM: u64 = 0x5011;

/// Deterministic assignment of document positions to subsets: a seeded
/// shuffle, then the first `n_count` go to `D_n`, the next `g_count` to `D_g`
/// and the next `i_count` to `D_i`.
pub fn assign_splits(
    n_docs: usize,
    n_count: usize,
    g_count: usize,
    i_count: usize,
    seed: u64,
) -> Result<Vec<(usize, Split)>> {
    let requested = n_count + g_count + i_count;
    if requested > n_docs {
        return Err(Error::InsufficientDocuments {
            requested,
            available: n_docs,
        });
    }
    let mut order: Vec<usize> = (0..n_docs).collect();
    order.shuffle(&mut rng::seeded(seed, SPLIT_STREAM));
    let tags = std::iter::repeat_n(Split::Synthetic, n_count)
        .chain(std::iter::repeat_n(Split::Guidance, g_count))
        .chain(std::iter::repeat_n(Split::Inference, i_count));
    Ok(order.into_iter().zip(tags).collect())
}

/// Removes every gold annotation from a document, leaving tokens (text and
/// boxes) awaiting synthetic annotation.
pub fn strip_gold(mut doc: Document) -> Document {
    for t in &mut doc.tokens {
        t.gold_label = None;
        t.parent_entity = None;
    }
    doc.entities.retain(|e| e.provenance != Provenance::Gold);
    doc.qa_pairs.clear();
    doc.provenance = Provenance::Synthetic;
    doc.split = Split::Synthetic;
    doc.relation_matrix =
        RelationMatrix::from_parents(doc.entities.len(), vec![None; doc.tokens.len()])
            .expect("empty relation is always valid");
    doc
}

pub fn split_collection(
    documents: &[Document],
    n_count: usize,
    g_count: usize,
    i_count: usize,
    seed: u64,
) -> Result<CollectionSplit> {
    let assignment = assign_splits(documents.len(), n_count, g_count, i_count, seed)?;
    let mut out = CollectionSplit::default();
    for (idx, split) in assignment {
        let doc = documents[idx].clone();
        match split {
            Split::Synthetic => out.d_n.push(strip_gold(doc)),
            Split::Guidance => out.d_g.push(Document { split, ..doc }),
            Split::Inference => out.d_i.push(Document { split, ..doc }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{BBox, Token};
    use std::collections::BTreeSet;

    fn doc(i: usize) -> Document {
        let mut t = Token::new(0, "x", BBox::new(0, 0, 10, 10).unwrap());
        t.gold_label = Some(1);
        Document {
            id: format!("d{i:04}"),
            page_width: 10,
            page_height: 10,
            tokens: vec![t],
            entities: vec![],
            relation_matrix: RelationMatrix::from_parents(0, vec![None]).unwrap(),
            qa_pairs: vec![],
            split: Split::Guidance,
            provenance: Provenance::Gold,
        }
    }

    #[test]
    fn cord_sized_split() {
        let docs: Vec<_> = (0..1000).map(doc).collect();
        let s = split_collection(&docs, 800, 100, 100, 7).unwrap();
        assert_eq!((s.d_n.len(), s.d_g.len(), s.d_i.len()), (800, 100, 100));
        s.validate().unwrap();
        let ids: BTreeSet<_> = s
            .d_n
            .iter()
            .chain(&s.d_g)
            .chain(&s.d_i)
            .map(|d| d.id.clone())
            .collect();
        assert_eq!(ids.len(), 1000);
        assert!(s.d_n.iter().all(|d| d.tokens[0].gold_label.is_none()));
        assert!(s.d_g.iter().all(|d| d.tokens[0].gold_label == Some(1)));
    }

    #[test]
    fn degenerate_and_deterministic() {
        let docs: Vec<_> = (0..10).map(doc).collect();
        let s = split_collection(&docs, 10, 0, 0, 3).unwrap();
        assert_eq!(s.d_n.len(), 10);
        assert_eq!(
            split_collection(&docs, 4, 3, 3, 11).unwrap(),
            split_collection(&docs, 4, 3, 3, 11).unwrap()
        );
        assert!(matches!(
            split_collection(&docs, 8, 2, 1, 0),
            Err(Error::InsufficientDocuments {
                requested: 11,
                available: 10
            })
        ));
    }
}
