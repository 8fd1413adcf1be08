//! Trains the subgraph model on cycle-vs-clique graphs with planted noise
//! and reports how well the extracted subgraphs recover the motifs.
//!
//! Run with `cargo run --release --example planted_motif [outer_steps]`.

use sib::eval::{evaluate, EvalOptions};
use sib::graphdata::{generate_planted_motif, split_dataset, Graph};
use sib::sib::{train, TrainConfig};

fn main() -> sib::Result<()> {
    env_logger::init();
    let steps = std::env::args().nth(1).map_or(200, |s| s.parse().expect("outer steps"));
    let ds = generate_planted_motif(200, 5, 10, 0.2, 7)?;
    let ds = split_dataset(&ds, (0.7, 0.1, 0.2), 7)?;
    let cfg = TrainConfig {
        outer_steps: steps,
        seed: 7,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let out = train(&ds, &cfg)?;
    let test: Vec<&Graph> = ds.subset(&ds.splits.test);
    let m = evaluate(&out.model, &test, &EvalOptions::default())?;
    println!("trained {steps} steps in {:.1?}; kept step {:?}", start.elapsed(), out.selected_step);
    print!("{}", m.report());
    Ok(())
}
