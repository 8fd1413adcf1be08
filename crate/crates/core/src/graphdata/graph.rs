use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Graph-level target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Scalar(f64),
}

/// Ground-truth membership, either per node or per canonical edge
/// (the order of [`Graph::edges`]).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruthMask {
    Nodes(Vec<bool>),
    Edges(Vec<bool>),
}

/// Undirected, unweighted graph with dense adjacency and node features.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    features: Matrix,
    pub label: Option<Label>,
    pub truth: Option<TruthMask>,
}

impl Graph {
    /// Validates that `adjacency` is a symmetric 0/1 matrix with zero
    /// diagonal and that `features` has one row per node.
    pub fn new(adjacency: Matrix, features: Matrix) -> Result<Self> {
        let n = adjacency.rows();
        if n == 0 {
            return Err(Error::Domain("graph must have at least one node".into()));
        }
        if adjacency.cols() != n {
            return Err(Error::shape("Graph::new adjacency", adjacency.shape(), (n, n)));
        }
        if features.rows() != n {
            return Err(Error::shape("Graph::new features", features.shape(), (n, features.cols())));
        }
        for i in 0..n {
            if adjacency.get(i, i) != 0.0 {
                return Err(Error::Domain(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency.get(i, j);
                if a != 0.0 && a != 1.0 {
                    return Err(Error::Domain(format!("adjacency entry ({i},{j}) = {a} is not 0/1")));
                }
                if a != adjacency.get(j, i) {
                    return Err(Error::Domain(format!("adjacency not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            adjacency,
            features,
            label: None,
            truth: None,
        })
    }

    /// Builds a graph from undirected edges; duplicates and both directions
    /// are accepted and merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], features: Matrix) -> Result<Self> {
        let mut adj = Matrix::zeros(n, n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Domain(format!("edge ({u},{v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::Domain(format!("self-loop at node {u}")));
            }
            adj.set(u, v, 1.0);
            adj.set(v, u, 1.0);
        }
        Self::new(adj, features)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_truth(mut self, truth: TruthMask) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.get(u, v) != 0.0
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(v)
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(u, _)| u)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Node-level truth mask, if any.
    pub fn node_truth(&self) -> Option<&[bool]> {
        match &self.truth {
            Some(TruthMask::Nodes(m)) => Some(m),
            _ => None,
        }
    }

    /// Subgraph induced by `nodes` (kept in the given order). Label is
    /// carried over; truth masks are dropped.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        if nodes.is_empty() {
            return Err(Error::Domain("induced subgraph of an empty node set".into()));
        }
        let adj = Matrix::from_fn(nodes.len(), nodes.len(), |i, j| self.adjacency.get(nodes[i], nodes[j]));
        let feats = self.features.select_rows(nodes)?;
        let mut g = Graph::new(adj, feats)?;
        g.label = self.label;
        Ok(g)
    }

    /// Returns a copy with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::Domain("permutation length differs from node count".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || inv[p] != usize::MAX {
                return Err(Error::Domain("not a permutation".into()));
            }
            inv[p] = i;
        }
        let adj = Matrix::from_fn(n, n, |a, b| self.adjacency.get(inv[a], inv[b]));
        let feats = self.features.select_rows(&inv)?;
        let mut g = Graph::new(adj, feats)?;
        g.label = self.label;
        if let Some(TruthMask::Nodes(m)) = &self.truth {
            g.truth = Some(TruthMask::Nodes(inv.iter().map(|&i| m[i]).collect()));
        }
        Ok(g)
    }

    /// Copy with a different feature matrix; label and truth mask are kept.
    pub fn with_features(&self, features: Matrix) -> Result<Graph> {
        let mut g = Graph::new(self.adjacency.clone(), features)?;
        g.label = self.label;
        g.truth = self.truth.clone();
        Ok(g)
    }

    pub(crate) fn replace_adjacency(&self, adjacency: Matrix) -> Result<Graph> {
        let mut g = Graph::new(adjacency, self.features.clone())?;
        g.label = self.label;
        Ok(g)
    }
}

/// Connected components of the subgraph induced by `selected`, found by
/// breadth-first search. Components are listed by their smallest node and
/// each holds its nodes in ascending order.
pub fn connected_components(g: &Graph, selected: &[usize]) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut in_sel = vec![false; n];
    for &v in selected {
        in_sel[v] = true;
    }
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if !in_sel[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            comp.push(u);
            for w in g.neighbors(u) {
                if in_sel[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Largest connected component of the selection; ties go to the component
/// containing the smallest node.
pub fn largest_component(g: &Graph, selected: &[usize]) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for c in connected_components(g, selected) {
        if c.len() > best.len() {
            best = c;
        }
    }
    best
}

/// Size of the largest clique (brute-force branch and bound; fine for the
/// small graphs this crate targets).
pub fn clique_number(g: &Graph) -> usize {
    fn expand(g: &Graph, size: usize, candidates: Vec<usize>, best: &mut usize) {
        if candidates.is_empty() {
            *best = (*best).max(size);
            return;
        }
        if size + candidates.len() <= *best {
            return;
        }
        for (k, &v) in candidates.iter().enumerate() {
            if size + candidates.len() - k <= *best {
                return;
            }
            let next: Vec<usize> = candidates[k + 1..].iter().copied().filter(|&w| g.has_edge(v, w)).collect();
            expand(g, size + 1, next, best);
        }
    }
    let mut best = 0;
    expand(g, 0, (0..g.n()).collect(), &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> Matrix {
        Matrix::ones(n, 1)
    }

    #[test]
    fn rejects_invalid_adjacency() {
        let mut a = Matrix::zeros(2, 2);
        a.set(0, 1, 1.0);
        assert!(Graph::new(a.clone(), ones(2)).is_err());
        a.set(1, 0, 1.0);
        assert!(Graph::new(a.clone(), ones(2)).is_ok());
        assert!(Graph::new(a, ones(3)).is_err());
        assert!(Graph::new(Matrix::identity(2), ones(2)).is_err());
        assert!(Graph::new(Matrix::zeros(0, 0), Matrix::zeros(0, 1)).is_err());
    }

    #[test]
    fn canonical_edges_are_sorted() {
        let g = Graph::from_edges(4, &[(3, 1), (0, 2), (1, 0), (0, 1)], ones(4)).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (0, 2), (1, 3)]);
    }

    #[test]
    fn components_of_two_triangles() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], ones(6)).unwrap();
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(connected_components(&g, &all), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(largest_component(&g, &all).len(), 3);
        assert_eq!(connected_components(&g, &[0, 4]).len(), 2);
        assert_eq!(clique_number(&g), 3);
    }

    #[test]
    fn clique_number_cases() {
        let k5: Vec<(usize, usize)> = (0..5).flat_map(|u| ((u + 1)..5).map(move |v| (u, v))).collect();
        assert_eq!(clique_number(&Graph::from_edges(5, &k5, ones(5)).unwrap()), 5);
        let c5: Vec<(usize, usize)> = (0..5).map(|u| (u, (u + 1) % 5)).collect();
        assert_eq!(clique_number(&Graph::from_edges(5, &c5, ones(5)).unwrap()), 2);
        assert_eq!(clique_number(&Graph::from_edges(1, &[], ones(1)).unwrap()), 1);
    }

    #[test]
    fn permutation_moves_rows() {
        let feats = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]);
        let g = Graph::from_edges(3, &[(0, 1)], feats).unwrap();
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert!(p.has_edge(2, 0));
        assert!(!p.has_edge(0, 1));
        assert_eq!(p.features().get(2, 0), 1.0);
    }
}
