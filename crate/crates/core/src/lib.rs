//! Subgraph information bottleneck.
//!
//! Finds, for each labeled graph, a node subset that predicts the label while
//! carrying as little information about the rest of the graph as possible.
//! Training alternates between fitting a Donsker–Varadhan statistics network
//! (inner loop) and updating the subgraph generator and classifier (outer
//! loop).

pub mod error;
pub mod numerics;

pub use error::{Error, Result};
pub mod graphdata;
pub mod rng;
pub mod gnn;
pub mod sib;
pub mod eval;
pub mod cli;
