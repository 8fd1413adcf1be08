use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graphdata::{kfold_splits, line_graph, parse_tu_dataset, split_dataset, Dataset};
use crate::sib::TrainConfig;

pub const FORMAT: &str = "sib-run-manifest";
pub const VERSION: u32 = 1;

/// How a dataset directory is split into train/val/test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitSpec {
    Fractions { train: f64, val: f64, test: f64, seed: u64 },
    Kfold { k: usize, fold: usize, seed: u64 },
}

/// Everything needed to rebuild the exact dataset a run saw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub name: String,
    /// SHA-256 over the dataset files (see [`fingerprint`]).
    pub fingerprint: String,
    pub line_graph: bool,
    pub split: SplitSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    pub manifest: PathBuf,
}

/// Record of one training run, written before training and finalized after.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub dataset: DatasetSpec,
    pub seed: u64,
    pub artifacts: Artifacts,
    /// `running`, `completed` or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selected_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub duration_secs: Option<f64>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Domain(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            file: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if m.format != FORMAT || m.version != VERSION {
            return Err(Error::Format {
                file: path.display().to_string(),
                line: 1,
                msg: format!("unsupported manifest {} v{}", m.format, m.version),
            });
        }
        Ok(m)
    }
}

/// Files of dataset `name` in `dir`: `{name}_*.txt`, sorted by file name.
pub fn dataset_files(dir: &Path, name: &str) -> Result<Vec<PathBuf>> {
    let prefix = format!("{name}_");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|f| f.to_str())
                    .is_some_and(|f| f.starts_with(&prefix) && f.ends_with(".txt"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// SHA-256 over each dataset file's name, length and bytes, in name order.
pub fn fingerprint(dir: &Path, name: &str) -> Result<String> {
    let mut hasher = Sha256::new();
    for path in dataset_files(dir, name)? {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let file = path.file_name().and_then(|f| f.to_str()).unwrap_or_default();
        hasher.update(file.as_bytes());
        hasher.update([0]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Parses the directory, applies the optional line-graph transform and the
/// split.
pub fn load_dataset(path: &Path, name: &str, line: bool, split: &SplitSpec) -> Result<Dataset> {
    let mut ds = parse_tu_dataset(path, name)?;
    if line {
        ds = ds.map_graphs(&format!("{name}_LINE"), line_graph)?;
    }
    match *split {
        SplitSpec::Fractions { train, val, test, seed } => split_dataset(&ds, (train, val, test), seed),
        SplitSpec::Kfold { k, fold, seed } => {
            if fold >= k {
                return Err(Error::Config(format!("fold {fold} out of range for {k} folds")));
            }
            let mut folds = kfold_splits(&ds, k, seed)?;
            ds.splits = folds.swap_remove(fold);
            Ok(ds)
        }
    }
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        load_dataset(&self.path, &self.name, self.line_graph, &self.split)
    }

    /// Errors if the files on disk no longer match the recorded fingerprint.
    pub fn verify(&self) -> Result<()> {
        let now = fingerprint(&self.path, &self.name)?;
        if now != self.fingerprint {
            return Err(Error::Domain(format!(
                "dataset {} changed since the manifest was written (fingerprint {} != {})",
                self.path.display(),
                now,
                self.fingerprint
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{generate_planted_motif, write_tu_dataset};

    #[test]
    fn fingerprint_tracks_content() {
        let tmp = tempfile::tempdir().unwrap();
        let ds = generate_planted_motif(6, 4, 3, 0.3, 1).unwrap();
        write_tu_dataset(&ds, tmp.path(), "P").unwrap();
        let a = fingerprint(tmp.path(), "P").unwrap();
        assert_eq!(a, fingerprint(tmp.path(), "P").unwrap());
        fs::write(tmp.path().join("unrelated.json"), "{}").unwrap();
        assert_eq!(a, fingerprint(tmp.path(), "P").unwrap());
        fs::write(tmp.path().join("P_graph_labels.txt"), "0\n1\n0\n1\n0\n0\n").unwrap();
        assert_ne!(a, fingerprint(tmp.path(), "P").unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let m = RunManifest {
            format: FORMAT.into(),
            version: VERSION,
            config: TrainConfig::default(),
            dataset: DatasetSpec {
                path: "/data/P".into(),
                name: "P".into(),
                fingerprint: "00".into(),
                line_graph: false,
                split: SplitSpec::Kfold { k: 10, fold: 3, seed: 1 },
            },
            seed: 0,
            artifacts: Artifacts {
                checkpoint: "c".into(),
                trace: "t".into(),
                manifest: "m".into(),
            },
            status: "running".into(),
            error: None,
            selected_step: None,
            duration_secs: None,
        };
        let path = tmp.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), m);
    }
}
