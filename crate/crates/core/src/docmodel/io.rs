use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::document::{Document, LabelSpace};
use crate::error::{Error, Result};

/// Gold and synthetic label spaces stored next to a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpaces {
    pub gold: LabelSpace,
    pub synthetic: LabelSpace,
}

pub fn to_jsonl(docs: &[Document]) -> Result<String> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, docs: &[Document]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a corpus in the JSON Lines schema. Works for generated corpora and
/// for externally converted ones; every document is validated.
pub fn read_jsonl(path: &Path) -> Result<Vec<Document>> {
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidConfig(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        doc.validate()?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Sidecar path for label spaces: `corpus.jsonl` → `corpus.labels.json`.
pub fn labels_path(corpus: &Path) -> std::path::PathBuf {
    corpus.with_extension("labels.json")
}

pub fn write_labels(path: &Path, spaces: &LabelSpaces) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(spaces)?)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelSpaces> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Content hash of a document list (hex SHA-256 of its JSON Lines form).
pub fn corpus_hash(docs: &[Document]) -> Result<String> {
    let mut h = Sha256::new();
    for d in docs {
        h.update(serde_json::to_vec(d)?);
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}
