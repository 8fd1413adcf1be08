//! Graph denoising: corrupts MUTAG with 30% redundant edges, turns every graph
//! into its line graph and asks the subgraph model to keep the original edges.
//!
//! Run with `cargo run --release --example denoising [seed]`.

use std::path::Path;

use sib::eval::{evaluate, EvalOptions, TruthKind};
use sib::graphdata::{generate_noisy_edges, line_graph, parse_tu_dataset, split_dataset, Graph};
use sib::sib::{train, TrainConfig};

fn main() -> sib::Result<()> {
    env_logger::init();
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    let ds = parse_tu_dataset(dir, "MUTAG")?;
    let noisy = generate_noisy_edges(&ds, 0.3, 1)?;
    let lines = noisy.map_graphs("MUTAG_LINE", line_graph)?;
    let lines = split_dataset(&lines, (0.7, 0.05, 0.25), 1)?;
    let cfg = TrainConfig {
        outer_steps: 200,
        seed,
        ..TrainConfig::default()
    };
    let out = train(&lines, &cfg)?;
    let test: Vec<&Graph> = lines.subset(&lines.splits.test);
    let opts = EvalOptions {
        truth: TruthKind::Edges,
        property: None,
    };
    let m = evaluate(&out.model, &test, &opts)?;
    print!("{}", m.report());
    Ok(())
}
