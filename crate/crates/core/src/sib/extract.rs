use crate::error::{Error, Result};
use crate::graphdata::{largest_component, Graph};
use crate::numerics::Matrix;

/// Hard subgraph read off an assignment or a node selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    /// Selected nodes in ascending order.
    pub selected: Vec<usize>,
    /// Induced subgraph on `selected`; `None` when nothing was selected.
    pub subgraph: Option<Graph>,
    /// Largest connected component of the selection, ascending.
    pub largest_component: Vec<usize>,
    /// Set when the selection came out empty.
    pub empty: bool,
}

/// Node `i` is selected iff `S[i,0] > S[i,1]` (ties are not selected), or
/// `S[i,0] > threshold` when a threshold is given.
pub fn extract_subgraph(g: &Graph, s: &Matrix, threshold: Option<f64>) -> Result<Extraction> {
    if s.rows() != g.n() || s.cols() != 2 {
        return Err(Error::shape("extract_subgraph", s.shape(), (g.n(), 2)));
    }
    let selected: Vec<usize> = (0..g.n())
        .filter(|&i| match threshold {
            Some(t) => s.get(i, 0) > t,
            None => s.get(i, 0) > s.get(i, 1),
        })
        .collect();
    extract_selection(g, &selected)
}

/// Builds an [`Extraction`] from an explicit node set.
pub fn extract_selection(g: &Graph, selected: &[usize]) -> Result<Extraction> {
    let mut selected = selected.to_vec();
    selected.sort_unstable();
    selected.dedup();
    if let Some(&v) = selected.iter().find(|&&v| v >= g.n()) {
        return Err(Error::Domain(format!("selected node {v} out of range for {} nodes", g.n())));
    }
    if selected.is_empty() {
        log::warn!("empty subgraph selection on a {}-node graph", g.n());
        return Ok(Extraction {
            selected,
            subgraph: None,
            largest_component: Vec::new(),
            empty: true,
        });
    }
    let subgraph = Some(g.induced(&selected)?);
    let largest_component = largest_component(g, &selected);
    Ok(Extraction {
        selected,
        subgraph,
        largest_component,
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], Matrix::ones(6, 1)).unwrap()
    }

    #[test]
    fn argmax_and_tie_rules() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)], Matrix::ones(3, 1)).unwrap();
        let s = Matrix::from_rows(&[&[0.9, 0.1], &[0.5, 0.5], &[0.2, 0.8]]);
        let e = extract_subgraph(&g, &s, None).unwrap();
        assert_eq!(e.selected, vec![0]);
        assert!(!e.empty);
        let flat = extract_subgraph(&g, &Matrix::filled(3, 2, 0.5), None).unwrap();
        assert!(flat.empty && flat.selected.is_empty() && flat.subgraph.is_none());
        let low = extract_subgraph(&g, &s, Some(0.15)).unwrap();
        assert_eq!(low.selected, vec![0, 1, 2]);
    }

    #[test]
    fn disjoint_triangles_keep_three_nodes() {
        let g = two_triangles();
        let e = extract_selection(&g, &(0..6).collect::<Vec<_>>()).unwrap();
        assert_eq!(e.largest_component, vec![0, 1, 2]);
        assert_eq!(e.subgraph.unwrap().edge_count(), 6);
        let part = extract_selection(&g, &[0, 1, 3]).unwrap();
        assert_eq!(part.subgraph.unwrap().edge_count(), 1);
        assert!(extract_selection(&g, &[7]).is_err());
    }
}
