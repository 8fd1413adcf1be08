//! Checks the gradient of the full training loss against central finite
//! differences, one line per parameter tensor.
//!
//! Run with `cargo run --release --example gradient_check`.

use sib::graphdata::generate_planted_motif;
use sib::numerics::{grad_check, Tape};
use sib::sib::objective::{connectivity_on_tape, label_loss_on_tape, mi_on_tape};
use sib::sib::{Model, TrainConfig};

fn main() -> sib::Result<()> {
    let ds = generate_planted_motif(12, 4, 3, 0.3, 1)?;
    let cfg = TrainConfig {
        hidden: 6,
        ..TrainConfig::default()
    };
    let model = Model::new(cfg.architecture(ds.meta.feature_dim, ds.meta.task.clone()), 3)?;
    let loss = |store: &sib::numerics::ParamStore, tape: &mut Tape| {
        let mut m = model.clone();
        m.store = store.clone();
        let inv = 1.0 / ds.len() as f64;
        let (mut terms, mut ge, mut se) = (Vec::new(), Vec::new(), Vec::new());
        for g in &ds.graphs {
            let pass = m.record(tape, g, None)?;
            let cls = label_loss_on_tape(tape, pass.logits, g.label)?;
            let a = tape.constant(g.adjacency().clone());
            let con = connectivity_on_tape(tape, pass.s.expect("subgraph mode"), a)?;
            terms.push(tape.scale(cls, inv));
            terms.push(tape.scale(con, cfg.alpha * inv));
            ge.push(pass.graph_embedding);
            se.push(pass.embedding);
        }
        let (g, s) = (tape.vstack(&ge)?, tape.vstack(&se)?);
        let mi = mi_on_tape(tape, store, m.statistics().expect("subgraph mode"), g, s)?;
        terms.push(tape.scale(mi, cfg.beta));
        tape.add_n(&terms)
    };
    let ids: Vec<_> = model.store.ids().collect();
    let report = grad_check(loss, &model.store, &ids, 1e-5, 1e-4)?;
    for p in &report.params {
        println!("{:<24} max rel error {:.2e}", p.name, p.max_rel_error);
    }
    println!("{}", if report.passed() { "all within 1e-4" } else { "FAILED" });
    Ok(())
}
