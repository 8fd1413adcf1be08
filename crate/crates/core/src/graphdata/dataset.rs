use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Label};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Task {
    Classification { num_classes: usize },
    Regression,
}

impl Task {
    /// Width of the prediction head.
    pub fn output_dim(&self) -> usize {
        match self {
            Task::Classification { num_classes } => *num_classes,
            Task::Regression => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub feature_dim: usize,
    pub task: Task,
    /// Original graph label values, indexed by remapped class.
    pub class_values: Vec<i64>,
    /// Original node label values, indexed by one-hot column. Empty when
    /// nodes carry the constant feature.
    pub node_label_values: Vec<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn all_train(n: usize) -> Self {
        Self {
            train: (0..n).collect(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub splits: Splits,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Checks labels against the task and splits for disjointness.
    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.graphs.iter().enumerate() {
            if g.feature_dim() != self.meta.feature_dim {
                return Err(Error::Domain(format!(
                    "graph {i} has feature width {} but dataset declares {}",
                    g.feature_dim(),
                    self.meta.feature_dim
                )));
            }
            match (&self.meta.task, g.label) {
                (Task::Classification { num_classes }, Some(Label::Class(c))) if c < *num_classes => {}
                (Task::Regression, Some(Label::Scalar(_))) => {}
                (_, label) => {
                    return Err(Error::Domain(format!("graph {i} label {label:?} does not fit {:?}", self.meta.task)))
                }
            }
        }
        let mut seen = vec![false; self.graphs.len()];
        for &i in self.splits.train.iter().chain(&self.splits.val).chain(&self.splits.test) {
            if i >= seen.len() || seen[i] {
                return Err(Error::Domain(format!("split index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Vec<&Graph> {
        idx.iter().map(|&i| &self.graphs[i]).collect()
    }

    /// Applies `f` to every graph, keeping splits; metadata feature width is
    /// refreshed from the first graph.
    pub fn map_graphs(&self, name: &str, f: impl Fn(&Graph) -> Result<Graph>) -> Result<Dataset> {
        let graphs = self.graphs.iter().map(f).collect::<Result<Vec<_>>>()?;
        let mut meta = self.meta.clone();
        meta.name = name.to_string();
        meta.feature_dim = graphs.first().map_or(meta.feature_dim, |g| g.feature_dim());
        Ok(Dataset {
            graphs,
            splits: self.splits.clone(),
            meta,
        })
    }
}

/// Seeded order that interleaves classes, so contiguous slices are
/// stratified. Regression datasets get a plain shuffle.
fn stratified_order(ds: &Dataset, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, g) in ds.graphs.iter().enumerate() {
        let key = match g.label {
            Some(Label::Class(c)) => c,
            _ => 0,
        };
        by_class.entry(key).or_default().push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(ds.len());
    for (class, mut members) in by_class {
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        for (rank, i) in members.into_iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / n, class, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Seeded, label-stratified train/val/test split into contiguous slices.
pub fn split_dataset(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<Dataset> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| *f < 0.0 || !f.is_finite()) || ft + fv + fs > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be nonnegative and sum to at most 1"
        )));
    }
    let n = ds.len();
    let count = |f: f64| ((f * n as f64) + 1e-9).round() as usize;
    let mut sizes = [count(ft), count(fv), count(fs)];
    if (ft + fv + fs - 1.0).abs() < 1e-9 {
        // whole dataset is assigned; the last requested split absorbs rounding
        let last = [ft, fv, fs].iter().rposition(|f| *f > 0.0).unwrap_or(0);
        let others: usize = sizes.iter().enumerate().filter(|(k, _)| *k != last).map(|(_, s)| s).sum();
        sizes[last] = n.saturating_sub(others);
    }
    if sizes.iter().sum::<usize>() > n {
        return Err(Error::Config(format!("split sizes {sizes:?} exceed {n} graphs")));
    }
    for (f, s) in [ft, fv, fs].iter().zip(sizes) {
        if *f > 0.0 && s == 0 {
            return Err(Error::Config(format!(
                "fractions {fractions:?} leave a requested split empty for {n} graphs"
            )));
        }
    }
    let order = stratified_order(ds, seed);
    let mut out = ds.clone();
    out.splits = Splits {
        train: order[..sizes[0]].to_vec(),
        val: order[sizes[0]..sizes[0] + sizes[1]].to_vec(),
        test: order[sizes[0] + sizes[1]..sizes[0] + sizes[1] + sizes[2]].to_vec(),
    };
    Ok(out)
}

/// Stratified k-fold splits: fold `i` is the test set, fold `i − 1` the
/// validation set and the remainder trains.
pub fn kfold_splits(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Splits>> {
    if k < 3 || k > ds.len() {
        return Err(Error::Config(format!("k-fold needs 3 <= k <= {}, got {k}", ds.len())));
    }
    let order = stratified_order(ds, seed);
    let folds: Vec<Vec<usize>> = (0..k)
        .map(|f| order.iter().copied().skip(f).step_by(k).collect())
        .collect();
    Ok((0..k)
        .map(|i| {
            let val_fold = (i + k - 1) % k;
            let train = (0..k)
                .filter(|f| *f != i && *f != val_fold)
                .flat_map(|f| folds[f].iter().copied())
                .collect();
            Splits {
                train,
                val: folds[val_fold].clone(),
                test: folds[i].clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn toy(n: usize) -> Dataset {
        let graphs = (0..n)
            .map(|i| {
                Graph::from_edges(2, &[(0, 1)], Matrix::ones(2, 1))
                    .unwrap()
                    .with_label(Label::Class(i % 2))
            })
            .collect();
        Dataset {
            graphs,
            splits: Splits::default(),
            meta: DatasetMeta {
                name: "toy".into(),
                feature_dim: 1,
                task: Task::Classification { num_classes: 2 },
                class_values: vec![0, 1],
                node_label_values: vec![],
            },
        }
    }

    #[test]
    fn denoising_split_sizes() {
        let ds = split_dataset(&toy(100), (0.7, 0.05, 0.25), 3).unwrap();
        assert_eq!(
            (ds.splits.train.len(), ds.splits.val.len(), ds.splits.test.len()),
            (70, 5, 25)
        );
        ds.validate().unwrap();
        let ones = ds.splits.train.iter().filter(|&&i| i % 2 == 1).count();
        assert_eq!(ones, 35);
    }

    #[test]
    fn all_train_and_determinism() {
        let ds = split_dataset(&toy(10), (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(ds.splits.train.len(), 10);
        assert!(ds.splits.val.is_empty() && ds.splits.test.is_empty());
        let a = split_dataset(&toy(50), (0.8, 0.1, 0.1), 9).unwrap();
        let b = split_dataset(&toy(50), (0.8, 0.1, 0.1), 9).unwrap();
        assert_eq!(a.splits, b.splits);
    }

    #[test]
    fn empty_requested_split_is_config_error() {
        assert!(matches!(
            split_dataset(&toy(5), (0.9, 0.05, 0.05), 1),
            Err(Error::Config(_))
        ));
        assert!(split_dataset(&toy(5), (0.9, 0.5, 0.0), 1).is_err());
    }

    #[test]
    fn kfold_partitions_everything() {
        let ds = toy(23);
        let folds = kfold_splits(&ds, 10, 4).unwrap();
        let mut tests: Vec<usize> = folds.iter().flat_map(|s| s.test.clone()).collect();
        tests.sort_unstable();
        assert_eq!(tests, (0..23).collect::<Vec<_>>());
        for s in &folds {
            assert_eq!(s.train.len() + s.val.len() + s.test.len(), 23);
        }
    }
}
