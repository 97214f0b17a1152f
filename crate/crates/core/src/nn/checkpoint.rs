//! Versioned JSON parameter dumps. Floats are written in shortest round-trip
//! form, so a reloaded checkpoint reproduces predictions bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Matrix, ParamSet};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub checkpoint_version: u32,
    /// Caller-defined tags, e.g. model kind and hyperparameters.
    pub meta: Value,
    tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(params: &ParamSet, meta: Value) -> Self {
        Checkpoint {
            checkpoint_version: CHECKPOINT_VERSION,
            meta,
            tensors: params
                .entries
                .iter()
                .map(|(name, m)| Tensor {
                    name: name.clone(),
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn params(&self) -> Result<ParamSet> {
        let mut set = ParamSet::default();
        for t in &self.tensors {
            let m = Matrix::from_vec(t.rows, t.cols, t.data.clone())
                .map_err(|e| e.context(format!("checkpoint tensor {}", t.name)))?;
            m.check_finite(&t.name)?;
            set.push(t.name.clone(), m);
        }
        Ok(set)
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(checkpoint).expect("checkpoint serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    if ck.checkpoint_version != CHECKPOINT_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: ck.checkpoint_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    Ok(ck)
}
