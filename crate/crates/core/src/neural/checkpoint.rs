//! Named-array container: magic, manifest length, JSON manifest, then raw
//! little-endian `f32` payloads in manifest order.

use serde::{Deserialize, Serialize};

use super::graph::Mat;
use super::params::{ParamGroup, ParamStore};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DOCADPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRecord {
    pub name: String,
    pub group: ParamGroup,
    pub shape: [usize; 2],
    pub dtype: String,
    pub frozen: bool,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub arrays: Vec<ArrayRecord>,
    /// Caller metadata (stage tag, plan hash, metrics, ...).
    pub meta: serde_json::Value,
}

pub fn encode_arrays(store: &ParamStore, meta: serde_json::Value) -> Result<Vec<u8>> {
    let mut arrays = Vec::with_capacity(store.len());
    let mut offset = 0;
    for id in store.ids() {
        let e = store.entry(id);
        let (r, c) = e.value.dim();
        arrays.push(ArrayRecord {
            name: e.name.clone(),
            group: e.group,
            shape: [r, c],
            dtype: "f32".into(),
            frozen: store.is_frozen(id),
            offset,
        });
        offset += 4 * r * c;
    }
    let manifest = serde_json::to_vec(&Manifest { arrays, meta })?;
    let mut out = Vec::with_capacity(16 + manifest.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for e in store.entries() {
        for &v in e.value.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Decoded arrays in manifest order.
#[derive(Debug, Clone)]
pub struct DecodedArrays {
    pub manifest: Manifest,
    pub values: Vec<Mat>,
}

pub fn decode_arrays(bytes: &[u8]) -> Result<DecodedArrays> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + len)
        .ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(body)?;
    let payload = &bytes[16 + len..];
    let mut values = Vec::with_capacity(manifest.arrays.len());
    let mut expected = 0;
    for a in &manifest.arrays {
        if a.dtype != "f32" || a.offset != expected {
            return Err(bad(&format!("bad record for {}", a.name)));
        }
        let n = a.shape[0] * a.shape[1];
        let raw = payload
            .get(a.offset..a.offset + 4 * n)
            .ok_or_else(|| bad(&format!("truncated payload for {}", a.name)))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        values.push(Mat::from_shape_vec((a.shape[0], a.shape[1]), data).expect("shape"));
        expected += 4 * n;
    }
    if expected != payload.len() {
        return Err(bad("trailing bytes after payload"));
    }
    Ok(DecodedArrays { manifest, values })
}

/// Copies decoded arrays into a store built with the same architecture and
/// restores the freeze flags.
pub fn load_into(store: &mut ParamStore, decoded: &DecodedArrays) -> Result<()> {
    if decoded.manifest.arrays.len() != store.len() {
        return Err(Error::ShapeMismatch {
            name: "parameter list".into(),
            expected: vec![store.len()],
            found: vec![decoded.manifest.arrays.len()],
        });
    }
    let mut frozen = Vec::new();
    for (id, (rec, value)) in store
        .ids()
        .collect::<Vec<_>>()
        .into_iter()
        .zip(decoded.manifest.arrays.iter().zip(&decoded.values))
    {
        let e = store.entry(id);
        let (r, c) = e.value.dim();
        if rec.name != e.name || rec.shape != [r, c] {
            return Err(Error::ShapeMismatch {
                name: rec.name.clone(),
                expected: vec![r, c],
                found: rec.shape.to_vec(),
            });
        }
        if rec.frozen {
            frozen.push(rec.group);
        }
        store.set_value(id, value.clone());
    }
    store.set_frozen(frozen);
    Ok(())
}
