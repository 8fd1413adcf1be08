//! Minimizes the connectivity loss directly over the assignment of two
//! disjoint triangles and prints how the rows saturate to 0/1.
//!
//! Run with `cargo run --release --example connectivity_loss`.

use sib::graphdata::Graph;
use sib::numerics::{rowwise_softmax, sgd_step, Direction, Matrix, ParamStore, Tape};
use sib::sib::connectivity_loss;
use sib::sib::objective::connectivity_on_tape;

fn main() -> sib::Result<()> {
    let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], Matrix::ones(6, 1))?;
    let mut store = ParamStore::new();
    let logits = store.add("logits", Matrix::from_fn(6, 2, |i, j| 0.01 * ((i * 7 + j * 3) % 5) as f64));
    for step in 0..=500 {
        let s = rowwise_softmax(store.get(logits));
        if step % 100 == 0 {
            let row_max = (0..6).map(|i| s.get(i, 0).max(s.get(i, 1))).fold(f64::INFINITY, f64::min);
            let loss = connectivity_loss(&s, g.adjacency())?;
            println!("step {step:>3}: loss {loss:.5}, min row max {row_max:.4}");
        }
        let mut tape = Tape::new();
        let z = tape.param(&store, logits);
        let sv = tape.rowwise_softmax(z);
        let a = tape.constant(g.adjacency().clone());
        let loss = connectivity_on_tape(&mut tape, sv, a)?;
        let grads = tape.backward(loss)?;
        sgd_step(&mut store, &[logits], &grads, 1.0, Direction::Descend)?;
    }
    let s = rowwise_softmax(store.get(logits));
    for i in 0..6 {
        println!("node {i}: [{:.3}, {:.3}]", s.get(i, 0), s.get(i, 1));
    }
    Ok(())
}
