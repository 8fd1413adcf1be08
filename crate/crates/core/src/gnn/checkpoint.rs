//! Checkpoint files.
//!
//! A checkpoint is one JSON document:
//!
//! ```text
//! {
//!   "format": "sib-checkpoint",
//!   "version": 1,
//!   "architecture": { ...model-specific description... },
//!   "tensors": [ { "name": "encoder.0.weight", "rows": 7, "cols": 16, "data": [ ... ] }, ... ]
//! }
//! ```
//!
//! Tensor data is row-major; values are written in shortest round-trip form
//! so a save/load cycle is lossless.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamStore};

pub const FORMAT: &str = "sib-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_store(architecture: serde_json::Value, store: &ParamStore) -> Self {
        let tensors = store
            .iter()
            .map(|(_, name, m)| TensorRecord {
                name: name.to_string(),
                rows: m.rows(),
                cols: m.cols(),
                data: m.data().to_vec(),
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            architecture,
            tensors,
        }
    }

    /// Copies every tensor of `store` from the checkpoint, matching by name
    /// and checking shapes.
    pub fn fill_store(&self, store: &mut ParamStore) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.name(id).to_string();
            let rec = self
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Domain(format!("checkpoint lacks tensor {name}")))?;
            store.set(id, Matrix::from_vec(rec.rows, rec.cols, rec.data.clone())?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Domain(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
            file: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Format {
                file: path.display().to_string(),
                line: 1,
                msg: format!("unsupported checkpoint {} v{}", ck.format, ck.version),
            });
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_is_lossless() {
        let mut store = ParamStore::new();
        store.add("a", Matrix::from_rows(&[&[0.1, 1.0 / 3.0], &[-2.5e-17, 7.0]]));
        store.add("b", Matrix::row_vector(&[std::f64::consts::PI]));
        let ck = Checkpoint::from_store(serde_json::json!({"kind": "test"}), &store);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let mut fresh = store.clone();
        fresh.get_mut(crate::numerics::ParamId(0)).data_mut()[0] = 9.0;
        back.fill_store(&mut fresh).unwrap();
        assert_eq!(fresh, store);
    }

    #[test]
    fn shape_mismatch_on_fill() {
        let mut store = ParamStore::new();
        store.add("a", Matrix::zeros(2, 2));
        let mut ck = Checkpoint::from_store(serde_json::Value::Null, &store);
        ck.tensors[0] = TensorRecord { name: "a".into(), rows: 1, cols: 2, data: vec![0.0, 0.0] };
        assert!(ck.fill_store(&mut store).is_err());
    }
}
