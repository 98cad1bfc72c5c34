//! Domain adaptation for visually rich document understanding with synthetic
//! annotations: document model, synthetic corpus and annotation generation,
//! joint-grained encoders, adaptation objectives, task heads, the staged
//! training workflow and evaluation.

pub mod docmodel;
pub mod enhancers;
pub mod error;
pub mod eval;
pub mod infuser;
pub mod model;
pub mod neural;
pub mod probes;
pub mod rng;
pub mod synthgen;
pub mod workflow;

pub use error::{Error, Result};
