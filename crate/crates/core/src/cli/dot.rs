//! Graphviz DOT export of a graph with its extracted subgraph.
//!
//! Grammar of the emitted file (a subset of DOT):
//!
//! ```text
//! graph G {
//!   node [style=filled, fillcolor=white];
//!   <id> [member=<0|1>];                       one line per node, ids 0..n
//!   <id> [member=1, fillcolor="#f4a261"];      selected nodes are also colored
//!   <u> -- <v>;                                one line per undirected edge, u < v
//! }
//! ```
//!
//! Nodes appear in index order, edges in lexicographic order. The membership
//! vector file holds one `0`/`1` per line in node order.

use std::fmt::Write as _;

use crate::graphdata::Graph;

pub const MEMBER_FILL: &str = "#f4a261";

pub fn to_dot(g: &Graph, selected: &[usize]) -> String {
    let mut member = vec![false; g.n()];
    for &v in selected {
        member[v] = true;
    }
    let mut s = String::from("graph G {\n  node [style=filled, fillcolor=white];\n");
    for (v, m) in member.iter().enumerate() {
        if *m {
            let _ = writeln!(s, "  {v} [member=1, fillcolor=\"{MEMBER_FILL}\"];");
        } else {
            let _ = writeln!(s, "  {v} [member=0];");
        }
    }
    for (u, v) in g.edges() {
        let _ = writeln!(s, "  {u} -- {v};");
    }
    s.push_str("}\n");
    s
}

pub fn membership_vector(n: usize, selected: &[usize]) -> String {
    let mut member = vec![false; n];
    for &v in selected {
        member[v] = true;
    }
    member.iter().map(|m| if *m { "1\n" } else { "0\n" }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn marks_selected_nodes() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)], Matrix::ones(3, 1)).unwrap();
        let dot = to_dot(&g, &[0, 1, 2]);
        assert_eq!(dot.matches("member=1").count(), 3);
        assert!(dot.contains("0 -- 1;") && dot.contains("1 -- 2;"));
        let none = to_dot(&g, &[]);
        assert_eq!(none.matches("member=1").count(), 0);
        assert_eq!(membership_vector(3, &[1]), "0\n1\n0\n");
    }
}
