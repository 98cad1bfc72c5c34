//! Template-based generator for form-like and receipt-like pages.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::docmodel::{
    jaccard_similarity, BBox, Document, Entity, LabelSpace, Provenance, QAPair, RelationMatrix,
    Split, Token,
};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentKind {
    Form,
    Receipt,
}

impl std::str::FromStr for DocumentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "form" => Ok(DocumentKind::Form),
            "receipt" => Ok(DocumentKind::Receipt),
            _ => Err(Error::InvalidConfig(format!("unknown document kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_documents: usize,
    pub document_kind: DocumentKind,
    /// Key-value rows for forms, item rows for receipts.
    pub fields_per_doc: (usize, usize),
    pub gold_label_space: LabelSpace,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(n_documents: usize, kind: DocumentKind, seed: u64) -> Self {
        let fields_per_doc = match kind {
            DocumentKind::Form => (5, FORM_FIELDS.len()),
            DocumentKind::Receipt => (2, 8),
        };
        CorpusSpec {
            n_documents,
            document_kind: kind,
            fields_per_doc,
            gold_label_space: gold_label_space(kind),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.fields_per_doc;
        if self.n_documents == 0 {
            return Err(Error::InvalidConfig(
                "n_documents must be at least 1".into(),
            ));
        }
        if lo > hi || hi == 0 {
            return Err(Error::InvalidConfig(format!(
                "fields_per_doc {lo}..{hi} is empty"
            )));
        }
        if self.document_kind == DocumentKind::Form && hi > FORM_FIELDS.len() {
            return Err(Error::InvalidConfig(format!(
                "forms have at most {} fields",
                FORM_FIELDS.len()
            )));
        }
        if self.gold_label_space != gold_label_space(self.document_kind) {
            return Err(Error::InvalidConfig(
                "gold label space does not match the document kind".into(),
            ));
        }
        Ok(())
    }
}

struct FormField {
    label: &'static str,
    key: &'static str,
    value: fn(&mut Rng) -> String,
}

const FORM_FIELDS: [FormField; 12] = [
    FormField {
        label: "company_name",
        key: "Company Name:",
        value: company,
    },
    FormField {
        label: "company_acn",
        key: "Company ACN:",
        value: acn,
    },
    FormField {
        label: "holder_name",
        key: "Holder Name:",
        value: holder,
    },
    FormField {
        label: "holder_acn",
        key: "Holder ACN:",
        value: acn,
    },
    FormField {
        label: "change_date",
        key: "Date of Change:",
        value: date,
    },
    FormField {
        label: "previous_notice_date",
        key: "Previous Notice Dated:",
        value: date,
    },
    FormField {
        label: "given_date",
        key: "Notice Given On:",
        value: date,
    },
    FormField {
        label: "share_class",
        key: "Share Class:",
        value: share_class,
    },
    FormField {
        label: "previous_shares",
        key: "Previous Shares Held:",
        value: share_count,
    },
    FormField {
        label: "previous_power",
        key: "Previous Voting Power:",
        value: percent,
    },
    FormField {
        label: "present_shares",
        key: "Present Shares Held:",
        value: share_count,
    },
    FormField {
        label: "present_power",
        key: "Present Voting Power:",
        value: percent,
    },
];

const RECEIPT_LABELS: [&str; 10] = [
    "store_name",
    "store_addr",
    "date",
    "menu_name",
    "menu_qty",
    "menu_price",
    "subtotal",
    "tax",
    "total",
    "payment",
];

pub const OUTSIDE_LABEL: &str = "O";

pub fn gold_label_space(kind: DocumentKind) -> LabelSpace {
    let mut cats = vec![OUTSIDE_LABEL];
    match kind {
        DocumentKind::Form => cats.extend(FORM_FIELDS.iter().map(|f| f.label)),
        DocumentKind::Receipt => cats.extend(RECEIPT_LABELS),
    }
    LabelSpace::from_strs(Provenance::Gold, &cats)
}

const COMPANY_HEADS: [&str; 16] = [
    "Acme", "Apex", "Boral", "Coastal", "Delta", "Eastern", "Granite", "Harbour", "Iron",
    "Kestrel", "Lumen", "Meridian", "Northern", "Orion", "Pacific", "Summit",
];
const COMPANY_MIDS: [&str; 10] = [
    "Mining",
    "Resources",
    "Capital",
    "Energy",
    "Gold",
    "Minerals",
    "Health",
    "Media",
    "Logistics",
    "Pharma",
];
const COMPANY_TAILS: [&str; 4] = ["Limited", "Ltd", "Pty Ltd", "Group"];
const GIVEN_NAMES: [&str; 10] = [
    "John", "Mary", "Wei", "Priya", "James", "Olivia", "Ahmed", "Sofia", "Liam", "Grace",
];
const SURNAMES: [&str; 10] = [
    "Smith", "Nguyen", "Brown", "Patel", "Wilson", "Taylor", "Chen", "Martin", "Walker", "Kelly",
];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const FORM_TITLES: [&str; 3] = [
    "Notice of Change of Interests of Substantial Holder",
    "Notice of Initial Substantial Holder",
    "Form 604 Change in Substantial Holding",
];
const FORM_NOTES: [&str; 4] = [
    "To the company or scheme named below",
    "Details of the relevant interests are set out in this notice",
    "This notice is given under the corporations act",
    "Particulars of each change are attached",
];
const DISHES: [&str; 16] = [
    "Chicken", "Rice", "Beef", "Noodle", "Soup", "Tea", "Latte", "Fried", "Spicy", "Green",
    "Salad", "Bread", "Cheese", "Burger", "Iced", "Mocha",
];
const STREETS: [&str; 6] = [
    "Main St",
    "King Rd",
    "Park Ave",
    "Hill St",
    "Bay Rd",
    "Market Ln",
];
const PAYMENTS: [&str; 3] = ["Cash", "Card", "Change"];

fn company(r: &mut Rng) -> String {
    format!(
        "{} {} {}",
        COMPANY_HEADS.choose(r).expect("non-empty"),
        COMPANY_MIDS.choose(r).expect("non-empty"),
        COMPANY_TAILS.choose(r).expect("non-empty")
    )
}

fn holder(r: &mut Rng) -> String {
    if r.random_bool(0.5) {
        company(r)
    } else {
        format!(
            "{} {}",
            GIVEN_NAMES.choose(r).expect("non-empty"),
            SURNAMES.choose(r).expect("non-empty")
        )
    }
}

fn acn(r: &mut Rng) -> String {
    format!(
        "{:03} {:03} {:03}",
        r.random_range(0..1000),
        r.random_range(0..1000),
        r.random_range(0..1000)
    )
}

fn date(r: &mut Rng) -> String {
    if r.random_bool(0.5) {
        format!(
            "{:02}/{:02}/{}",
            r.random_range(1..29),
            r.random_range(1..13),
            r.random_range(2010..2024)
        )
    } else {
        format!(
            "{} {} {}",
            r.random_range(1..29),
            MONTHS.choose(r).expect("non-empty"),
            r.random_range(2010..2024)
        )
    }
}

fn share_class(r: &mut Rng) -> String {
    [
        "Ordinary Shares",
        "Fully Paid Ordinary",
        "Preference Shares",
        "Ordinary",
    ]
    .choose(r)
    .expect("non-empty")
    .to_string()
}

fn share_count(r: &mut Rng) -> String {
    let n: u64 = r.random_range(10_000..90_000_000);
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn percent(r: &mut Rng) -> String {
    format!("{}.{:02}%", r.random_range(1..40), r.random_range(0..100))
}

fn money(cents: u64) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

/// Lays words out left to right on one text row.
struct PageWriter {
    tokens: Vec<Token>,
    entities: Vec<Entity>,
    labels: Vec<usize>,
    parents: Vec<Option<usize>>,
    y: i32,
    char_w: i32,
    row_h: i32,
}

impl PageWriter {
    fn new(char_w: i32, row_h: i32, top: i32) -> Self {
        PageWriter {
            tokens: Vec::new(),
            entities: Vec::new(),
            labels: Vec::new(),
            parents: Vec::new(),
            y: top,
            char_w,
            row_h,
        }
    }

    /// Writes one entity made of labelled word groups starting at `x` and
    /// returns the x just past its last word.
    fn row(&mut self, x: i32, parts: &[(&str, usize)], category: &str) -> i32 {
        let entity = self.entities.len();
        let first = self.tokens.len();
        let mut cx = x;
        for (text, label) in parts {
            for word in text.split_whitespace() {
                let w = self.char_w * word.chars().count() as i32 + self.char_w / 2;
                let bbox = BBox::clamped(
                    cx as i64,
                    self.y as i64,
                    (cx + w) as i64,
                    (self.y + self.row_h) as i64,
                );
                self.tokens.push(Token::new(self.tokens.len(), word, bbox));
                self.labels.push(*label);
                self.parents.push(Some(entity));
                cx += w + self.char_w;
            }
        }
        if self.tokens.len() == first {
            return cx;
        }
        let bbox = self.tokens[first..]
            .iter()
            .fold(self.tokens[first].bbox, |acc, t| acc.union(&t.bbox));
        let pad = self.char_w / 2;
        let bbox = BBox::clamped(
            (bbox.x0 - pad) as i64,
            (bbox.y0 - pad) as i64,
            (bbox.x1 + pad) as i64,
            (bbox.y1 + pad) as i64,
        );
        let text = self.tokens[first..]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        self.entities.push(Entity {
            id: entity,
            text,
            bbox,
            category: Some(category.to_string()),
            provenance: Provenance::Gold,
        });
        cx
    }

    fn advance(&mut self, gap: i32) {
        self.y += self.row_h + gap;
    }

    fn finish(self, id: String, page: (u32, u32), qa: Vec<(String, String, usize)>) -> Document {
        let mut tokens = self.tokens;
        for (t, (l, p)) in tokens.iter_mut().zip(self.labels.iter().zip(&self.parents)) {
            t.gold_label = Some(*l);
            t.parent_entity = *p;
        }
        let relation = RelationMatrix::from_parents(self.entities.len(), self.parents)
            .expect("parents index written entities");
        let qa_pairs = qa
            .into_iter()
            .map(|(key, answer, target)| QAPair {
                match_score: jaccard_similarity(&answer, &self.entities[target].text),
                key_text: key,
                answer_text: answer,
                target_entity: self.entities[target].id,
            })
            .collect();
        Document {
            id,
            page_width: page.0,
            page_height: page.1,
            tokens,
            entities: self.entities,
            relation_matrix: relation,
            qa_pairs,
            split: Split::Guidance,
            provenance: Provenance::Gold,
        }
    }
}

fn trim_key(key: &str) -> String {
    key.trim_end_matches(':').to_string()
}

fn form_document(index: usize, spec: &CorpusSpec, r: &mut Rng) -> Document {
    let mut w = PageWriter::new(11, 18, r.random_range(30..60));
    let x0 = r.random_range(40..80);
    w.row(
        x0,
        &[(FORM_TITLES.choose(r).expect("non-empty"), 0)],
        "header",
    );
    w.advance(r.random_range(30..50));
    if r.random_bool(0.6) {
        w.row(
            x0,
            &[(FORM_NOTES.choose(r).expect("non-empty"), 0)],
            "paragraph",
        );
        w.advance(r.random_range(25..40));
    }
    let (lo, hi) = spec.fields_per_doc;
    let count = r.random_range(lo..=hi);
    let mut fields: Vec<usize> = (0..FORM_FIELDS.len()).collect();
    fields.shuffle(r);
    let mut chosen = fields[..count].to_vec();
    chosen.sort_unstable();
    if r.random_bool(0.5) {
        chosen.shuffle(r);
    }
    let gap_hi = ((900 - w.y) / count.max(1) as i32 - 18).clamp(9, 40);
    let gap_lo = (gap_hi / 2).max(8);
    let mut qa = Vec::new();
    for &f in &chosen {
        let field = &FORM_FIELDS[f];
        let value = (field.value)(r);
        let end = w.row(x0, &[(field.key, 0)], "key");
        w.row(end + r.random_range(10..40), &[(&value, f + 1)], "value");
        qa.push((trim_key(field.key), value, w.entities.len() - 1));
        w.advance(r.random_range(gap_lo..=gap_hi));
    }
    if w.y < 900 && r.random_bool(0.5) {
        w.row(x0, &[("Signature of authorised person", 0)], "paragraph");
    }
    w.finish(format!("form-{index:05}"), (64, 88), qa)
}

fn receipt_document(index: usize, spec: &CorpusSpec, r: &mut Rng) -> Document {
    let space = &spec.gold_label_space;
    let l = |name: &str| space.id_of(name).expect("receipt label");
    let mut w = PageWriter::new(14, 22, r.random_range(20..50));
    let x0 = r.random_range(40..90);
    let store = format!(
        "{} {}",
        COMPANY_HEADS.choose(r).expect("non-empty"),
        ["Cafe", "Bistro", "Mart", "Kitchen", "Bakery"]
            .choose(r)
            .expect("non-empty")
    );
    w.row(x0, &[(&store, l("store_name"))], "header");
    w.advance(12);
    let addr = format!(
        "{} {}",
        r.random_range(1..300),
        STREETS.choose(r).expect("non-empty")
    );
    w.row(x0, &[(&addr, l("store_addr"))], "paragraph");
    w.advance(14);
    let d = date(r);
    w.row(x0, &[("Date:", 0), (&d, l("date"))], "field");
    let mut qa = vec![("Date".to_string(), d, w.entities.len() - 1)];
    w.advance(24);
    let (lo, hi) = spec.fields_per_doc;
    let items = r.random_range(lo..=hi);
    let mut subtotal = 0;
    for _ in 0..items {
        let name = if r.random_bool(0.5) {
            format!(
                "{} {}",
                DISHES.choose(r).expect("non-empty"),
                DISHES.choose(r).expect("non-empty")
            )
        } else {
            DISHES.choose(r).expect("non-empty").to_string()
        };
        let qty = r.random_range(1..5u64);
        let unit = r.random_range(150..2500u64);
        subtotal += qty * unit;
        let qty_s = if r.random_bool(0.5) {
            format!("{qty}x")
        } else {
            qty.to_string()
        };
        w.row(
            x0,
            &[
                (&qty_s, l("menu_qty")),
                (&name, l("menu_name")),
                (&money(qty * unit), l("menu_price")),
            ],
            "table",
        );
        w.advance(r.random_range(4..12));
    }
    w.advance(10);
    let tax = subtotal / 10;
    let total = subtotal + tax;
    let paid = total.div_ceil(500) * 500;
    let rows: [(&str, &str, u64); 4] = [
        ("Subtotal", "subtotal", subtotal),
        ("Tax", "tax", tax),
        ("Total", "total", total),
        (PAYMENTS.choose(r).expect("non-empty"), "payment", paid),
    ];
    for (key, label, cents) in rows {
        let v = money(cents);
        w.row(x0, &[(key, 0), (&v, l(label))], "total");
        qa.push((key.to_string(), v, w.entities.len() - 1));
        w.advance(r.random_range(4..10));
    }
    w.finish(format!("receipt-{index:05}"), (48, 96), qa)
}

/// Generates `spec.n_documents` gold documents. Document `k` depends only on
/// `(spec, k)`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    Ok((0..spec.n_documents)
        .map(|k| {
            let mut r = rng::seeded(spec.seed, 0xC0_0000 + k as u64);
            match spec.document_kind {
                DocumentKind::Form => form_document(k, spec, &mut r),
                DocumentKind::Receipt => receipt_document(k, spec, &mut r),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_form_has_parents_everywhere() {
        let mut spec = CorpusSpec::new(1, DocumentKind::Form, 1);
        spec.fields_per_doc = (3, 3);
        let docs = generate_corpus(&spec).unwrap();
        assert_eq!(docs.len(), 1);
        let d = &docs[0];
        assert!(d.entities.len() >= 3);
        assert!(d.tokens.iter().all(|t| t.parent_entity.is_some()));
        d.validate().unwrap();
    }

    #[test]
    fn entity_text_is_child_text() {
        let docs = generate_corpus(&CorpusSpec::new(5, DocumentKind::Receipt, 3)).unwrap();
        for d in &docs {
            for (j, kids) in d.relation_matrix.children().iter().enumerate() {
                let text: Vec<&str> = kids.iter().map(|&i| d.tokens[i].text.as_str()).collect();
                assert_eq!(d.entities[j].text, text.join(" "));
            }
        }
    }

    #[test]
    fn qa_scores_match_targets() {
        let docs = generate_corpus(&CorpusSpec::new(3, DocumentKind::Form, 2)).unwrap();
        for d in &docs {
            assert!(!d.qa_pairs.is_empty());
            for qa in &d.qa_pairs {
                let e = d.entity(qa.target_entity).unwrap();
                assert_eq!(qa.match_score, jaccard_similarity(&qa.answer_text, &e.text));
            }
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = CorpusSpec::new(1, DocumentKind::Form, 1);
        spec.fields_per_doc = (4, 3);
        assert!(generate_corpus(&spec).is_err());
        spec.n_documents = 0;
        assert!(generate_corpus(&spec).is_err());
    }
}
