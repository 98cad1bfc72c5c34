use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use docadapt_core::workflow::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::config::Config;

/// Written by every command: the exact argument vector, the effective
/// configuration and the hashes of everything read and written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Vec<String>,
    pub version: String,
    pub config: Config,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn new(config: &Config) -> Self {
        Manifest {
            command: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_time_seconds: 0.0,
        }
    }

    fn hash(path: &Path) -> Result<String> {
        Ok(sha256_hex(&std::fs::read(path)?))
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), Self::hash(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), Self::hash(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path.to_path_buf())
    }
}
