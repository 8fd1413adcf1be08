use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{connected_components, Graph};

/// Population mean and standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// Exact-match fraction.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Domain("accuracy of an empty prediction set".into()));
    }
    if preds.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// The selection was empty; precision is reported as 0.
    pub empty_selection: bool,
}

/// Precision and recall of `selected` against a node truth mask. An empty
/// selection has precision 0 and sets the flag; a mask with no true node
/// gives recall 0.
pub fn node_pr(selected: &[usize], truth: Option<&[bool]>) -> Result<PrecisionRecall> {
    let truth = truth.ok_or_else(|| Error::Domain("precision/recall needs a truth mask".into()))?;
    if let Some(&v) = selected.iter().find(|&&v| v >= truth.len()) {
        return Err(Error::Domain(format!("selected node {v} outside a {}-node mask", truth.len())));
    }
    let hits = selected.iter().filter(|&&v| truth[v]).count() as f64;
    let positives = truth.iter().filter(|t| **t).count() as f64;
    let empty_selection = selected.is_empty();
    Ok(PrecisionRecall {
        precision: if empty_selection { 0.0 } else { hits / selected.len() as f64 },
        recall: if positives == 0.0 { 0.0 } else { hits / positives },
        empty_selection,
    })
}

/// Expected precision and recall of a uniformly random node set of the
/// same size: `|true| / n` and `k / n`.
pub fn random_pr(selected_len: usize, truth: &[bool]) -> (f64, f64) {
    let n = truth.len() as f64;
    let positives = truth.iter().filter(|t| **t).count() as f64;
    (positives / n, selected_len as f64 / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub count: usize,
    /// Largest component size over the node count of the whole graph.
    pub largest_fraction: f64,
}

pub fn component_stats(g: &Graph, selected: &[usize]) -> ComponentStats {
    let comps = connected_components(g, selected);
    let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
    ComponentStats {
        count: comps.len(),
        largest_fraction: largest as f64 / g.n() as f64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    /// `|G_sub| / |G|` in percent.
    pub subgraph_size_pct: MeanStd,
    /// Largest connected part over `|G|`, in percent.
    pub largest_component_pct: MeanStd,
}

/// Size statistics from `(node count, selected count, largest component)`
/// triples.
pub fn size_stats(selections: &[(usize, usize, usize)]) -> Result<SizeStats> {
    if selections.is_empty() {
        return Err(Error::Domain("size statistics over an empty split".into()));
    }
    let pct = |k: usize, n: usize| 100.0 * k as f64 / n as f64;
    let sizes: Vec<f64> = selections.iter().map(|&(n, k, _)| pct(k, n)).collect();
    let largest: Vec<f64> = selections.iter().map(|&(n, _, l)| pct(l, n)).collect();
    Ok(SizeStats {
        subgraph_size_pct: MeanStd::of(&sizes).expect("nonempty"),
        largest_component_pct: MeanStd::of(&largest).expect("nonempty"),
    })
}
