use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, TruthMask};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Guards `fraction * count` against representation error before rounding
/// (so 0.3 · 10 counts as exactly 3).
fn scaled_count(fraction: f64, count: usize, round_up: bool) -> usize {
    let x = fraction * count as f64;
    if round_up {
        (x - 1e-9).ceil().max(0.0) as usize
    } else {
        (x + 1e-9).floor().max(0.0) as usize
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalize_adjacency(g: &Graph) -> Matrix {
    let n = g.n();
    let a = g.adjacency();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / (a.row(i).iter().sum::<f64>() + 1.0).sqrt())
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        let hat = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
        hat * inv_sqrt[i] * inv_sqrt[j]
    })
}

/// Adds `⌈fraction·|E|⌉` new edges drawn uniformly from the non-edges
/// (capped at the number available). The result carries an edge truth mask
/// marking original edges `true` and added ones `false`.
pub fn add_redundant_edges(g: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if fraction < 0.0 || !fraction.is_finite() {
        return Err(Error::Config(format!("redundant edge fraction {fraction} must be >= 0")));
    }
    let n = g.n();
    let original = g.edges();
    let mut non_edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .filter(|&(u, v)| !g.has_edge(u, v))
        .collect();
    let wanted = scaled_count(fraction, original.len(), true);
    if wanted > non_edges.len() {
        log::warn!(
            "requested {wanted} redundant edges but only {} non-edges exist; capping",
            non_edges.len()
        );
    }
    let k = wanted.min(non_edges.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = non_edges.partial_shuffle(&mut rng, k);

    let mut adj = g.adjacency().clone();
    for &(u, v) in chosen.iter() {
        adj.set(u, v, 1.0);
        adj.set(v, u, 1.0);
    }
    let mut out = g.replace_adjacency(adj)?;
    let mask = out.edges().iter().map(|&(u, v)| g.has_edge(u, v)).collect();
    out.truth = Some(TruthMask::Edges(mask));
    Ok(out)
}

/// Removes `⌊fraction·|E|⌋` edges chosen uniformly. Truth masks are dropped.
pub fn drop_edges(g: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("drop fraction {fraction} must lie in [0, 1]")));
    }
    let mut edges = g.edges();
    let k = scaled_count(fraction, edges.len(), false).min(edges.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (removed, _) = edges.partial_shuffle(&mut rng, k);
    let mut adj = g.adjacency().clone();
    for &(u, v) in removed.iter() {
        adj.set(u, v, 0.0);
        adj.set(v, u, 0.0);
    }
    g.replace_adjacency(adj)
}

/// One node per canonical edge `(u, v)`, `u < v`; two such nodes are adjacent
/// iff their edges share an endpoint. Node features are `[x_u | x_v]`. An
/// edge truth mask on `g` becomes the node truth mask of the result.
pub fn line_graph(g: &Graph) -> Result<Graph> {
    let edges = g.edges();
    if edges.is_empty() {
        return Err(Error::Domain("line graph of an edgeless graph".into()));
    }
    let m = edges.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
    for (k, &(u, v)) in edges.iter().enumerate() {
        incident[u].push(k);
        incident[v].push(k);
    }
    let mut adj = Matrix::zeros(m, m);
    for list in &incident {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                adj.set(i, j, 1.0);
                adj.set(j, i, 1.0);
            }
        }
    }
    let x = g.features();
    let d = x.cols();
    let feats = Matrix::from_fn(m, 2 * d, |k, j| {
        let (u, v) = edges[k];
        if j < d {
            x.get(u, j)
        } else {
            x.get(v, j - d)
        }
    });
    let mut out = Graph::new(adj, feats)?;
    out.label = g.label;
    if let Some(TruthMask::Edges(mask)) = &g.truth {
        out.truth = Some(TruthMask::Nodes(mask.clone()));
    }
    Ok(out)
}
