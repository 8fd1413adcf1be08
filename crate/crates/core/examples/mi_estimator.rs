//! Trains the Donsker-Varadhan statistics network on graph embeddings paired
//! with themselves and with a shuffled copy, and prints both estimates.
//!
//! Run with `cargo run --release --example mi_estimator [steps]`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sib::graphdata::{generate_planted_motif, Graph};
use sib::sib::{graph_embeddings, inner_loop, Model, TrainConfig};

fn main() -> sib::Result<()> {
    let steps = std::env::args().nth(1).map_or(500, |s| s.parse().expect("steps"));
    let ds = generate_planted_motif(64, 5, 10, 0.2, 3)?;
    let graphs: Vec<&Graph> = ds.graphs.iter().collect();
    let cfg = TrainConfig::default();
    let mut model = Model::new(cfg.architecture(ds.meta.feature_dim, ds.meta.task.clone()), 0)?;
    let emb = graph_embeddings(&graphs, &model.encoder, &model.store)?;
    let mut perm: Vec<usize> = (0..emb.rows()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let shuffled = emb.select_rows(&perm)?;
    for (label, partner) in [("matched", &emb), ("independent", &shuffled)] {
        let trace = inner_loop(&mut model, &emb, partner, steps, 0.05, true)?;
        let every = (steps / 5).max(1);
        let points: Vec<String> = trace.iter().step_by(every).map(|v| format!("{v:.3}")).collect();
        println!("{label:<12} {} -> {:.4}", points.join(" "), trace[steps]);
    }
    Ok(())
}
