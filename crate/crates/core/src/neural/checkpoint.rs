//! JSON checkpoint container.
//!
//! ```text
//! {
//!   "format": "mortsim-dense-cell",
//!   "version": 1,
//!   "seed": <u64 training seed>,
//!   "spec": {"input_size": N, "depth": K, "hidden_width": H},
//!   "layers": [{"rows": D_k, "cols": D_{k-1}, "weights": [row-major], "bias": [..]}, ..],
//!   "meta": {"<key>": "<value>", ..}
//! }
//! ```
//! Floats are written in shortest round-trip form, so a reload is exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cell::{CellSpec, DenseCell, Layer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "mortsim-dense-cell";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Raw {
    format: String,
    version: u32,
    seed: u64,
    spec: CellSpec,
    layers: Vec<Layer>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub cell: DenseCell,
    pub seed: u64,
    /// Free-form provenance (sex, training configuration, ...).
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let raw = Raw {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            spec: *self.cell.spec(),
            layers: self.cell.layers().to_vec(),
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::parse("checkpoint", e))?;
        if raw.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointMismatch(format!(
                "unknown format {:?}",
                raw.format
            )));
        }
        if raw.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "unsupported version {}",
                raw.version
            )));
        }
        let cell = DenseCell::from_layers(raw.spec, raw.layers)?;
        if !cell.params().all(f64::is_finite) {
            return Err(Error::CheckpointMismatch("non-finite parameter".into()));
        }
        Ok(Self {
            cell,
            seed: raw.seed,
            meta: raw.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::super::cell::init_cell;
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let cell = init_cell(CellSpec::new(5, 4, 3).unwrap(), 0.1, 0.1, 99).unwrap();
        let ck = Checkpoint {
            cell,
            seed: 99,
            meta: BTreeMap::from([("sex".to_string(), "F".to_string())]),
        };
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn rejects_wrong_shapes_and_versions() {
        let cell = init_cell(CellSpec::new(2, 3, 2).unwrap(), 0.1, 0.1, 1).unwrap();
        let ck = Checkpoint {
            cell,
            seed: 1,
            meta: BTreeMap::new(),
        };
        let text = ck.to_json();
        let bumped = text.replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(
            Checkpoint::from_json(&bumped),
            Err(Error::CheckpointMismatch(_))
        ));
        let bad_spec = text.replace("\"hidden_width\": 2", "\"hidden_width\": 3");
        assert!(matches!(
            Checkpoint::from_json(&bad_spec),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
