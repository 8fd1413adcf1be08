//! 10-fold cross-validated graph classification on MUTAG with the subgraph
//! model, the attention readout baseline and the plain GCN baseline.
//!
//! Run with `cargo run --release --example mutag_classification [outer_steps]`.

use std::path::Path;

use rayon::prelude::*;
use sib::eval::MeanStd;
use sib::graphdata::{kfold_splits, parse_tu_dataset, Graph};
use sib::sib::{accuracy_on, train, Mode, TrainConfig};

fn main() -> sib::Result<()> {
    env_logger::init();
    let steps = std::env::args().nth(1).map_or(200, |s| s.parse().expect("outer steps"));
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    let ds = parse_tu_dataset(dir, "MUTAG")?;
    let folds = kfold_splits(&ds, 10, 0)?;
    for mode in [Mode::Gcn, Mode::Att, Mode::Sib] {
        let cfg = TrainConfig {
            outer_steps: steps,
            mode,
            ..TrainConfig::default()
        };
        let start = std::time::Instant::now();
        let accs = folds
            .par_iter()
            .map(|split| {
                let mut fold = ds.clone();
                fold.splits = split.clone();
                let out = train(&fold, &cfg)?;
                let test: Vec<&Graph> = fold.subset(&fold.splits.test);
                Ok(accuracy_on(&out.model, &test)?.unwrap_or(0.0))
            })
            .collect::<sib::Result<Vec<f64>>>()?;
        let summary = MeanStd::of(&accs).expect("ten folds");
        println!("{mode:?}: {summary} ({:.1?})", start.elapsed());
    }
    Ok(())
}
