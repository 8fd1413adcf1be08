use crate::error::{Error, Result};
use crate::gnn::{encode, GcnEncoder, Mlp};
use crate::graphdata::{normalize_adjacency, Graph, Label};
use crate::numerics::{Matrix, ParamStore, Tape, Var};

use super::model::gumbel_matrix;

/// Zero-sum rows of `SᵀAS` fall back to `[0.5, 0.5]` below this sum.
pub const ROW_NORM_EPS: f64 = 1e-12;

/// Shared encoder θ1 followed by the assignment MLP θ2 (h → 2).
#[derive(Clone, Debug)]
pub struct SubgraphGenerator {
    pub encoder: GcnEncoder,
    pub mlp: Mlp,
}

/// Witness network φ2 scoring `[graph embedding | subgraph embedding]`.
#[derive(Clone, Debug)]
pub struct StatisticsNetwork {
    pub mlp: Mlp,
}

/// `softmax((MLP(X) + noise) / temperature)` row by row.
pub fn assignment_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    mlp: &Mlp,
    x: Var,
    temperature: f64,
    noise: Option<&Matrix>,
) -> Result<Var> {
    let mut logits = mlp.forward(tape, store, x)?;
    if let Some(noise) = noise {
        let g = tape.constant(noise.clone());
        logits = tape.add(logits, g)?;
    }
    if temperature != 1.0 {
        logits = tape.scale(logits, 1.0 / temperature);
    }
    Ok(tape.rowwise_softmax(logits))
}

/// First row of `SᵀX`.
pub fn subgraph_embedding_on_tape(tape: &mut Tape, s: Var, x: Var) -> Result<Var> {
    let st = tape.transpose(s);
    let pooled = tape.matmul(st, x)?;
    tape.row(pooled, 0)
}

/// `‖RowNorm(SᵀAS) − I₂‖_F`.
pub fn connectivity_on_tape(tape: &mut Tape, s: Var, a: Var) -> Result<Var> {
    let st = tape.transpose(s);
    let sa = tape.matmul(st, a)?;
    let sas = tape.matmul(sa, s)?;
    let norm = tape.row_normalize(sas, ROW_NORM_EPS);
    let eye = tape.constant(Matrix::identity(2));
    let diff = tape.sub(norm, eye)?;
    Ok(tape.frobenius_norm(diff))
}

/// Witness score `f(G, G_sub)` for one pair of 1×h embeddings.
pub fn statistics_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    net: &StatisticsNetwork,
    graph_emb: Var,
    sub_emb: Var,
) -> Result<Var> {
    let joint = tape.hcat(graph_emb, sub_emb)?;
    net.mlp.forward(tape, store, joint)
}

/// Donsker–Varadhan estimate over a batch of N ≥ 2 pairs given as N×h
/// embedding matrices: `mean f(G_i, s_i) − ln((1/N) Σ exp f(G_i, s_{i+1 mod N}))`.
pub fn mi_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    net: &StatisticsNetwork,
    graph_embs: Var,
    sub_embs: Var,
) -> Result<Var> {
    let n = tape.value(graph_embs).rows();
    if n < 2 {
        return Err(Error::Domain(format!("mutual information estimate needs at least 2 pairs, got {n}")));
    }
    if tape.value(sub_embs).rows() != n {
        return Err(Error::shape("mi_lower_bound", tape.value(graph_embs).shape(), tape.value(sub_embs).shape()));
    }
    let shifted: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let partners = tape.select_rows(sub_embs, &shifted)?;
    let joint = tape.hcat(graph_embs, sub_embs)?;
    let marginal = tape.hcat(graph_embs, partners)?;
    let pos = net.mlp.forward(tape, store, joint)?;
    let neg = net.mlp.forward(tape, store, marginal)?;
    // both terms shifted by the largest negative score, so a constant witness
    // gives exactly 0
    let shift = tape.value(neg).data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pos = tape.add_scalar(pos, -shift);
    let neg = tape.add_scalar(neg, -shift);
    let pos_mean = tape.mean(pos);
    let lse = tape.log_sum_exp(neg);
    let log_mean_exp = tape.add_scalar(lse, -(n as f64).ln());
    tape.sub(pos_mean, log_mean_exp)
}

/// Cross-entropy for class labels, squared error for scalar labels.
pub fn label_loss_on_tape(tape: &mut Tape, logits: Var, label: Option<Label>) -> Result<Var> {
    match label {
        Some(Label::Class(c)) => tape.cross_entropy(logits, c),
        Some(Label::Scalar(y)) => tape.mean_squared_error(logits, Matrix::filled(1, 1, y)),
        None => Err(Error::Domain("graph has no label".into())),
    }
}

fn node_embeddings(tape: &mut Tape, g: &Graph, enc: &GcnEncoder, store: &ParamStore) -> Result<Var> {
    let a = tape.constant(normalize_adjacency(g));
    let x = tape.constant(g.features().clone());
    enc.forward(tape, store, a, x)
}

/// Row-stochastic n×2 assignment; column 0 is the membership probability.
pub fn generate_assignment(g: &Graph, gen: &SubgraphGenerator, store: &ParamStore) -> Result<Matrix> {
    let mut tape = Tape::new();
    let x = node_embeddings(&mut tape, g, &gen.encoder, store)?;
    let s = assignment_on_tape(&mut tape, store, &gen.mlp, x, 1.0, None)?;
    Ok(tape.value(s).clone())
}

/// Reparameterized sample `softmax((logits + Gumbel noise) / τ)`.
pub fn gumbel_assignment(g: &Graph, gen: &SubgraphGenerator, store: &ParamStore, tau: f64, seed: u64) -> Result<Matrix> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature {tau} must be positive")));
    }
    let mut tape = Tape::new();
    let x = node_embeddings(&mut tape, g, &gen.encoder, store)?;
    let noise = gumbel_matrix(g.n(), 2, seed);
    let s = assignment_on_tape(&mut tape, store, &gen.mlp, x, tau, Some(&noise))?;
    Ok(tape.value(s).clone())
}

/// Row 0 of `SᵀX`, the membership-weighted sum of node embeddings.
pub fn subgraph_embedding(s: &Matrix, x: &Matrix) -> Result<Matrix> {
    if s.rows() != x.rows() || s.cols() != 2 {
        return Err(Error::shape("subgraph_embedding", s.shape(), x.shape()));
    }
    let pooled = s.transpose().matmul(x)?;
    Ok(Matrix::row_vector(pooled.row(0)))
}

pub fn connectivity_loss(s: &Matrix, a: &Matrix) -> Result<f64> {
    if s.cols() != 2 || a.rows() != s.rows() || a.cols() != s.rows() {
        return Err(Error::shape("connectivity_loss", s.shape(), a.shape()));
    }
    let mut tape = Tape::new();
    let sv = tape.constant(s.clone());
    let av = tape.constant(a.clone());
    let loss = connectivity_on_tape(&mut tape, sv, av)?;
    Ok(tape.scalar(loss))
}

/// Score of `(G, s_emb)` with G embedded by the shared encoder and a sum
/// readout.
pub fn statistics_score(
    g: &Graph,
    sub_emb: &Matrix,
    net: &StatisticsNetwork,
    enc: &GcnEncoder,
    store: &ParamStore,
) -> Result<f64> {
    let mut tape = Tape::new();
    let x = node_embeddings(&mut tape, g, enc, store)?;
    let ge = tape.col_sums(x);
    if tape.value(ge).cols() != sub_emb.cols() || sub_emb.rows() != 1 {
        return Err(Error::shape("statistics_score", tape.value(ge).shape(), sub_emb.shape()));
    }
    let se = tape.constant(sub_emb.clone());
    let f = statistics_on_tape(&mut tape, store, net, ge, se)?;
    Ok(tape.scalar(f))
}

/// Sum readouts of the shared encoder for each graph, stacked N×h.
pub fn graph_embeddings(graphs: &[&Graph], enc: &GcnEncoder, store: &ParamStore) -> Result<Matrix> {
    let rows = graphs
        .iter()
        .map(|g| Ok(encode(g, enc, store)?.col_sums()))
        .collect::<Result<Vec<_>>>()?;
    Matrix::vstack(&rows.iter().collect::<Vec<_>>())
}

/// DV estimate from precomputed N×h embedding matrices.
pub fn mi_from_embeddings(
    graph_embs: &Matrix,
    sub_embs: &Matrix,
    net: &StatisticsNetwork,
    store: &ParamStore,
) -> Result<f64> {
    let mut tape = Tape::new();
    let g = tape.constant(graph_embs.clone());
    let s = tape.constant(sub_embs.clone());
    let mi = mi_on_tape(&mut tape, store, net, g, s)?;
    Ok(tape.scalar(mi))
}

/// DV estimate over `(G_i, s_i)` pairs.
pub fn mi_lower_bound(
    pairs: &[(&Graph, Matrix)],
    net: &StatisticsNetwork,
    enc: &GcnEncoder,
    store: &ParamStore,
) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::Domain(format!(
            "mutual information estimate needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let graphs: Vec<&Graph> = pairs.iter().map(|(g, _)| *g).collect();
    let ge = graph_embeddings(&graphs, enc, store)?;
    let se = Matrix::vstack(&pairs.iter().map(|(_, s)| s).collect::<Vec<_>>())?;
    mi_from_embeddings(&ge, &se, net, store)
}

/// Loss of the classifier applied to the subgraph embedding under `s`.
pub fn classification_loss(
    g: &Graph,
    s: &Matrix,
    enc: &GcnEncoder,
    clf: &Mlp,
    store: &ParamStore,
) -> Result<f64> {
    let mut tape = Tape::new();
    let x = node_embeddings(&mut tape, g, enc, store)?;
    if s.rows() != g.n() || s.cols() != 2 {
        return Err(Error::shape("classification_loss", s.shape(), (g.n(), 2)));
    }
    let sv = tape.constant(s.clone());
    let emb = subgraph_embedding_on_tape(&mut tape, sv, x)?;
    let logits = clf.forward(&mut tape, store, emb)?;
    let loss = label_loss_on_tape(&mut tape, logits, g.label)?;
    Ok(tape.scalar(loss))
}
