//! Subgraph recognition: the assignment generator, connectivity loss,
//! mutual-information estimator and the bi-level training loop.

pub mod extract;
pub mod model;
pub mod objective;
pub mod train;

pub use extract::{extract_selection, extract_subgraph, Extraction};
pub use model::{gumbel_matrix, Architecture, GraphPass, Head, Mode, Model, Relaxation};
pub use objective::{
    classification_loss, connectivity_loss, generate_assignment, graph_embeddings, gumbel_assignment,
    mi_from_embeddings, mi_lower_bound, statistics_score, subgraph_embedding, StatisticsNetwork, SubgraphGenerator,
    ROW_NORM_EPS,
};
pub use train::{
    accuracy_on, forward_batch, inner_loop, outer_gradients, outer_step, train, train_with, BatchForward,
    LossBreakdown, RelaxKind, TrainConfig, TrainOutcome, TrainRecord,
};
