//! Graphs, datasets, TU-format I/O, synthetic generators and structural
//! transforms.

pub mod dataset;
pub mod graph;
pub mod synth;
pub mod transform;
pub mod tu;

pub use dataset::{kfold_splits, split_dataset, Dataset, DatasetMeta, Splits, Task};
pub use graph::{clique_number, connected_components, largest_component, Graph, Label, TruthMask};
pub use synth::{degree_features, generate_noisy_edges, generate_planted_motif, generate_planted_regression};
pub use transform::{add_redundant_edges, drop_edges, line_graph, normalize_adjacency};
pub use tu::{parse_tu_dataset, write_tu_dataset};
