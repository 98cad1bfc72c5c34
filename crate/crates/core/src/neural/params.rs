use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::Mat;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Component groups; freezing works at this granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    TokenEncoder,
    EntityEncoder,
    Layout,
    JointEncoder,
    Alignment,
    TokenDecoder,
    EntityDecoder,
    TagHead,
    RetrievalHead,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 9] = [
        ParamGroup::TokenEncoder,
        ParamGroup::EntityEncoder,
        ParamGroup::Layout,
        ParamGroup::JointEncoder,
        ParamGroup::Alignment,
        ParamGroup::TokenDecoder,
        ParamGroup::EntityDecoder,
        ParamGroup::TagHead,
        ParamGroup::RetrievalHead,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamGroup::TokenEncoder => "token_encoder",
            ParamGroup::EntityEncoder => "entity_encoder",
            ParamGroup::Layout => "layout",
            ParamGroup::JointEncoder => "joint_encoder",
            ParamGroup::Alignment => "alignment",
            ParamGroup::TokenDecoder => "token_decoder",
            ParamGroup::EntityDecoder => "entity_decoder",
            ParamGroup::TagHead => "tag_head",
            ParamGroup::RetrievalHead => "retrieval_head",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown parameter group {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Normal(f64),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub group: ParamGroup,
    pub value: Mat,
}

/// Named trainable arrays. Values are kept exactly representable in `f32`
/// so checkpoints round-trip without loss.
#[derive(Debug, Clone)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    frozen: BTreeSet<ParamGroup>,
    init_rng: Rng,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.frozen == other.frozen
    }
}

pub(crate) fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            entries: Vec::new(),
            frozen: BTreeSet::new(),
            init_rng: rng::seeded(seed, 0x1417),
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        group: ParamGroup,
        shape: (usize, usize),
        init: Init,
    ) -> ParamId {
        let name = name.into();
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        let value = match init {
            Init::Constant(c) => Mat::from_elem(shape, round_f32(c)),
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("valid std");
                let rng = &mut self.init_rng;
                Mat::from_shape_simple_fn(shape, || round_f32(dist.sample(rng)))
            }
        };
        self.entries.push(ParamEntry { name, group, value });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.entries[id.0].value
    }

    /// Replaces a value, rounding to `f32` precision.
    pub fn set_value(&mut self, id: ParamId, value: Mat) {
        assert_eq!(
            value.dim(),
            self.entries[id.0].value.dim(),
            "set_value shape"
        );
        self.entries[id.0].value = value.mapv(round_f32);
    }

    pub fn value_mut_raw(&mut self, id: ParamId) -> &mut Mat {
        &mut self.entries[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
    }

    pub fn group_of(&self, id: ParamId) -> ParamGroup {
        self.entries[id.0].group
    }

    pub fn freeze(&mut self, group: ParamGroup) {
        self.frozen.insert(group);
    }

    pub fn unfreeze(&mut self, group: ParamGroup) {
        self.frozen.remove(&group);
    }

    pub fn set_frozen(&mut self, groups: impl IntoIterator<Item = ParamGroup>) {
        self.frozen = groups.into_iter().collect();
    }

    pub fn frozen_groups(&self) -> &BTreeSet<ParamGroup> {
        &self.frozen
    }

    pub fn is_group_frozen(&self, group: ParamGroup) -> bool {
        self.frozen.contains(&group)
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen.contains(&self.entries[id.0].group)
    }

    pub fn count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn count_in(&self, group: ParamGroup) -> usize {
        self.entries
            .iter()
            .filter(|e| e.group == group)
            .map(|e| e.value.len())
            .sum()
    }

    /// Bitwise comparison of the parameters of one group.
    pub fn group_bits_equal(&self, other: &ParamStore, group: ParamGroup) -> bool {
        self.entries
            .iter()
            .zip(&other.entries)
            .filter(|(a, _)| a.group == group)
            .all(|(a, b)| {
                a.name == b.name
                    && a.value.dim() == b.value.dim()
                    && a.value
                        .iter()
                        .zip(b.value.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
