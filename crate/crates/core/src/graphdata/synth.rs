//! Seeded synthetic corpora with exact ground truth.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, DatasetMeta, Splits, Task};
use super::graph::{clique_number, connected_components, Graph, Label, TruthMask};
use super::transform::add_redundant_edges;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::{derive_seed, rng_for};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Motif {
    Cycle,
    Clique,
}

fn motif_edges(kind: Motif, m: usize) -> Vec<(usize, usize)> {
    match kind {
        Motif::Cycle => (0..m).map(|u| (u, (u + 1) % m)).collect(),
        Motif::Clique => (0..m).flat_map(|u| ((u + 1)..m).map(move |v| (u, v))).collect(),
    }
}

/// Motif on nodes `0..m`, Erdős–Rényi noise on the rest, one attachment edge
/// from every noise component to a random motif node, then a random node
/// relabeling. Returns the graph and its motif-node mask.
fn plant(kind: Motif, m: usize, noise: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<(Graph, Vec<bool>)> {
    let n = m + noise;
    let mut edges = motif_edges(kind, m);
    for u in m..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    if noise > 0 {
        let noise_only = Graph::from_edges(n, &edges, Matrix::ones(n, 1))?;
        let noise_nodes: Vec<usize> = (m..n).collect();
        for comp in connected_components(&noise_only, &noise_nodes) {
            let from = comp[rng.gen_range(0..comp.len())];
            edges.push((from, rng.gen_range(0..m)));
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
    let mut mask = vec![false; n];
    for &p in &perm[..m] {
        mask[p] = true;
    }
    Ok((Graph::from_edges(n, &edges, Matrix::ones(n, 1))?, mask))
}

/// Replaces node features with a one-hot encoding of node degree over the
/// sorted distinct degrees of the whole corpus, the same encoding the TU
/// reader builds from node labels. Returns the degree value of each column.
pub fn degree_features(graphs: &[Graph]) -> Result<(Vec<Graph>, Vec<i64>)> {
    let mut values: Vec<usize> = graphs.iter().flat_map(|g| (0..g.n()).map(|v| g.degree(v))).collect();
    values.sort_unstable();
    values.dedup();
    let out = graphs
        .iter()
        .map(|g| {
            let feats = Matrix::from_fn(g.n(), values.len(), |v, k| f64::from(u8::from(values[k] == g.degree(v))));
            g.with_features(feats)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, values.into_iter().map(|d| d as i64).collect()))
}

fn check_params(motif_size: usize, edge_prob: f64) -> Result<()> {
    if motif_size < 3 {
        return Err(Error::Config(format!("motif size {motif_size} must be at least 3")));
    }
    if !(edge_prob > 0.0 && edge_prob < 1.0) {
        return Err(Error::Config(format!("edge probability {edge_prob} must lie in (0, 1)")));
    }
    Ok(())
}

/// Cycle-vs-clique classification corpus. Even-indexed graphs carry a cycle
/// motif (label 0), odd-indexed ones a clique (label 1). Node features are
/// one-hot degrees (see [`degree_features`]); the truth mask marks motif nodes.
pub fn generate_planted_motif(
    count: usize,
    motif_size: usize,
    noise_size: usize,
    edge_prob: f64,
    seed: u64,
) -> Result<Dataset> {
    check_params(motif_size, edge_prob)?;
    let mut graphs = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = rng_for(seed, i as u64);
        let (kind, label) = if i % 2 == 0 { (Motif::Cycle, 0) } else { (Motif::Clique, 1) };
        let (g, mask) = plant(kind, motif_size, noise_size, edge_prob, &mut rng)?;
        graphs.push(g.with_label(Label::Class(label)).with_truth(TruthMask::Nodes(mask)));
    }
    let (graphs, degrees) = degree_features(&graphs)?;
    Ok(Dataset {
        graphs,
        splits: Splits::default(),
        meta: DatasetMeta {
            name: "PLANTED".into(),
            feature_dim: degrees.len(),
            task: Task::Classification { num_classes: 2 },
            class_values: vec![0, 1],
            node_label_values: degrees,
        },
    })
}

/// Regression corpus: each graph plants a clique whose size is drawn from
/// `motif_sizes`; the target is the clique number of the whole graph, so it
/// can be recomputed on any extracted subgraph with [`clique_number`].
pub fn generate_planted_regression(
    count: usize,
    motif_sizes: std::ops::RangeInclusive<usize>,
    noise_size: usize,
    edge_prob: f64,
    seed: u64,
) -> Result<Dataset> {
    check_params(*motif_sizes.start(), edge_prob)?;
    let mut graphs = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = rng_for(seed, i as u64);
        let m = rng.gen_range(motif_sizes.clone());
        let (g, mask) = plant(Motif::Clique, m, noise_size, edge_prob, &mut rng)?;
        let y = clique_number(&g) as f64;
        graphs.push(g.with_label(Label::Scalar(y)).with_truth(TruthMask::Nodes(mask)));
    }
    let (graphs, degrees) = degree_features(&graphs)?;
    Ok(Dataset {
        graphs,
        splits: Splits::default(),
        meta: DatasetMeta {
            name: "PLANTED_REG".into(),
            feature_dim: degrees.len(),
            task: Task::Regression,
            class_values: vec![],
            node_label_values: degrees,
        },
    })
}

/// Corrupts every graph with `⌈fraction·|E|⌉` redundant edges (edge truth
/// masks mark the original edges).
pub fn generate_noisy_edges(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let graphs = ds
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| add_redundant_edges(g, fraction, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = ds.meta.clone();
    meta.name = format!("{}_NOISY", ds.meta.name);
    Ok(Dataset {
        graphs,
        splits: ds.splits.clone(),
        meta,
    })
}
