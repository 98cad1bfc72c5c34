use std::collections::BTreeSet;

use super::document::{Entity, RelationMatrix, Token};
use crate::error::{Error, Result};

/// Assigns each token to the entity whose box contains the token center.
///
/// Among several containing entities the one with the largest IoU against the
/// token box wins, remaining ties go to the lowest entity id. Tokens whose
/// center lies outside every entity get an empty row.
pub fn compute_relation_matrix(tokens: &[Token], entities: &[Entity]) -> Result<RelationMatrix> {
    let mut tids = BTreeSet::new();
    if let Some(t) = tokens.iter().find(|t| !tids.insert(t.id)) {
        return Err(Error::DimensionMismatch(format!(
            "duplicate token id {}",
            t.id
        )));
    }
    let mut eids = BTreeSet::new();
    if let Some(e) = entities.iter().find(|e| !eids.insert(e.id)) {
        return Err(Error::DimensionMismatch(format!(
            "duplicate entity id {}",
            e.id
        )));
    }

    let parents = tokens
        .iter()
        .map(|tok| {
            let (cx, cy) = tok.bbox.center();
            let mut best: Option<(usize, f64)> = None;
            for (j, ent) in entities.iter().enumerate() {
                if !ent.bbox.contains_point(cx, cy) {
                    continue;
                }
                let iou = tok.bbox.iou(&ent.bbox);
                best = match best {
                    None => Some((j, iou)),
                    Some((bj, biou)) => {
                        if iou > biou || (iou == biou && ent.id < entities[bj].id) {
                            Some((j, iou))
                        } else {
                            Some((bj, biou))
                        }
                    }
                };
            }
            best.map(|(j, _)| j)
        })
        .collect();
    RelationMatrix::from_parents(entities.len(), parents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{BBox, Provenance};

    fn tok(id: usize, cx: i32, cy: i32) -> Token {
        Token::new(id, "w", BBox::new(cx - 5, cy - 5, cx + 5, cy + 5).unwrap())
    }

    fn ent(id: usize, b: [i32; 4]) -> Entity {
        Entity {
            id,
            text: String::new(),
            bbox: BBox::new(b[0], b[1], b[2], b[3]).unwrap(),
            category: None,
            provenance: Provenance::Gold,
        }
    }

    #[test]
    fn single_containment() {
        let r = compute_relation_matrix(&[tok(0, 50, 50)], &[ent(0, [0, 0, 100, 100])]).unwrap();
        assert_eq!(r.to_rows(), vec![vec![1]]);
    }

    #[test]
    fn no_entities() {
        let r = compute_relation_matrix(&[tok(0, 50, 50), tok(1, 60, 60)], &[]).unwrap();
        assert_eq!(r.n_tokens(), 2);
        assert_eq!(r.n_entities(), 0);
        assert_eq!(r.to_dense().shape(), &[2, 0]);
    }

    #[test]
    fn three_tokens_two_entities() {
        let toks = [tok(0, 100, 100), tok(1, 500, 500), tok(2, 900, 900)];
        let ents = [ent(0, [0, 0, 400, 400]), ent(1, [450, 450, 1000, 1000])];
        let r = compute_relation_matrix(&toks, &ents).unwrap();
        assert_eq!(r.to_rows(), vec![vec![1, 0], vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn iou_then_id_tie_break() {
        let toks = [tok(0, 50, 50)];
        // the tighter box has the larger IoU with the token
        let ents = [ent(0, [0, 0, 200, 200]), ent(1, [40, 40, 60, 60])];
        let r = compute_relation_matrix(&toks, &ents).unwrap();
        assert_eq!(r.parent_of(0), Some(1));
        // identical boxes: lowest id wins even when listed second
        let ents = [ent(5, [0, 0, 200, 200]), ent(2, [0, 0, 200, 200])];
        let r = compute_relation_matrix(&toks, &ents).unwrap();
        assert_eq!(r.parent_of(0), Some(1));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let toks = [tok(0, 50, 50), tok(0, 60, 60)];
        assert!(compute_relation_matrix(&toks, &[]).is_err());
        let ents = [ent(1, [0, 0, 10, 10]), ent(1, [0, 0, 20, 20])];
        assert!(compute_relation_matrix(&[tok(0, 5, 5)], &ents).is_err());
    }
}
