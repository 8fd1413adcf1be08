//! Regression on planted cliques: the target is the clique number, and the
//! property bias measures how well the extracted subgraph keeps it.
//!
//! Run with `cargo run --release --example property_bias [outer_steps]`.

use sib::eval::{evaluate, EvalOptions};
use sib::graphdata::{clique_number, generate_planted_regression, split_dataset, Graph};
use sib::sib::{train, Mode, TrainConfig};

fn main() -> sib::Result<()> {
    env_logger::init();
    let steps = std::env::args().nth(1).map_or(200, |s| s.parse().expect("outer steps"));
    let ds = generate_planted_regression(200, 3..=6, 10, 0.2, 5)?;
    let ds = split_dataset(&ds, (0.7, 0.1, 0.2), 5)?;
    let clique = |g: &Graph| clique_number(g) as f64;
    let opts = EvalOptions {
        property: Some(&clique),
        ..EvalOptions::default()
    };
    for mode in [Mode::Sib, Mode::Att] {
        let cfg = TrainConfig {
            outer_steps: steps,
            mode,
            ..TrainConfig::default()
        };
        let out = train(&ds, &cfg)?;
        let test: Vec<&Graph> = ds.subset(&ds.splits.test);
        let m = evaluate(&out.model, &test, &opts)?;
        println!("{mode:?}:");
        print!("{}", m.report());
    }
    Ok(())
}
