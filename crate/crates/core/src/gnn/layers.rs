use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphdata::{normalize_adjacency, Graph};
use crate::numerics::{Matrix, ParamId, ParamStore, Tape, Var};

/// Uniform in `[−1/√fan_in, 1/√fan_in]`.
pub fn init_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

/// Affine map `x W + b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let weight = store.add(format!("{name}.weight"), init_uniform(input, output, input, rng));
        let bias = store.add(format!("{name}.bias"), init_uniform(1, output, input, rng));
        Self { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).rows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).cols()
    }
}

/// Multi-layer perceptron with ReLU between layers and a linear output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [input, hidden.., output]`.
    pub fn new(store: &mut ParamStore, name: &str, dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = tape.relu(h);
            }
            h = layer.forward(tape, store, h)?;
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        self.layers[0].input_dim(store)
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        self.layers.last().expect("nonempty").output_dim(store)
    }
}

/// Stack of GCN layers `X ← ReLU(Â_norm X W)`; every layer, including the
/// last, keeps its ReLU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcnEncoder {
    pub layers: Vec<ParamId>,
}

impl GcnEncoder {
    /// `dims = [input, hidden_1, .., hidden_L]`.
    pub fn new(store: &mut ParamStore, name: &str, dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an encoder needs at least one layer");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| store.add(format!("{name}.{i}.weight"), init_uniform(w[0], w[1], w[0], rng)))
            .collect();
        Self { layers }
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.clone()
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.layers[0]).rows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(*self.layers.last().expect("nonempty")).cols()
    }

    /// Records the encoder on `tape` given the normalized adjacency and the
    /// feature matrix as nodes.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, norm_adj: Var, x: Var) -> Result<Var> {
        let in_dim = self.input_dim(store);
        let width = tape.value(x).cols();
        if width != in_dim {
            return Err(Error::shape("encode", tape.value(x).shape(), (tape.value(x).rows(), in_dim)));
        }
        let mut h = x;
        for &w in &self.layers {
            let wv = tape.param(store, w);
            let ax = tape.matmul(norm_adj, h)?;
            let axw = tape.matmul(ax, wv)?;
            h = tape.relu(axw);
        }
        Ok(h)
    }
}

/// Node embeddings of `g` (n×h).
pub fn encode(g: &Graph, enc: &GcnEncoder, store: &ParamStore) -> Result<Matrix> {
    let mut tape = Tape::new();
    let a = tape.constant(normalize_adjacency(g));
    let x = tape.constant(g.features().clone());
    let h = enc.forward(&mut tape, store, a, x)?;
    Ok(tape.value(h).clone())
}

/// Self-attention readout `softmax(Φ2 tanh(Φ1 Xᵀ)) X`, with Φ1: h×h and
/// Φ2: 1×h.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionReadout {
    pub phi1: ParamId,
    pub phi2: ParamId,
}

impl AttentionReadout {
    pub fn new(store: &mut ParamStore, name: &str, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let phi1 = store.add(format!("{name}.phi1"), init_uniform(hidden, hidden, hidden, rng));
        let phi2 = store.add(format!("{name}.phi2"), init_uniform(1, hidden, hidden, rng));
        Self { phi1, phi2 }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.phi1, self.phi2]
    }

    /// Returns `(embedding 1×h, scores 1×n)`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<(Var, Var)> {
        let p1 = tape.param(store, self.phi1);
        let p2 = tape.param(store, self.phi2);
        let xt = tape.transpose(x);
        let hidden = tape.matmul(p1, xt)?;
        let act = tape.tanh(hidden);
        let logits = tape.matmul(p2, act)?;
        let scores = tape.rowwise_softmax(logits);
        let emb = tape.matmul(scores, x)?;
        Ok((emb, scores))
    }
}

/// Plain-value attention readout of node embeddings: `(embedding, scores)`.
pub fn attention_readout(x: &Matrix, att: &AttentionReadout, store: &ParamStore) -> Result<(Matrix, Matrix)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let (e, s) = att.forward(&mut tape, store, xv)?;
    Ok((tape.value(e).clone(), tape.value(s).clone()))
}

/// Mean over node embeddings (1×h).
pub fn mean_readout(tape: &mut Tape, x: Var) -> Var {
    let n = tape.value(x).rows() as f64;
    let s = tape.col_sums(x);
    tape.scale(s, 1.0 / n)
}

/// Indices of the `⌈ratio·n⌉` highest scores, ties going to the lower index;
/// returned in ascending order.
pub fn topk_attention_subgraph(scores: &[f64], ratio: f64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("top-k ratio {ratio} must lie in (0, 1]")));
    }
    let n = scores.len();
    let k = ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen = order[..k.min(n)].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Prediction head output for a single embedding row.
pub fn classify(embedding: &Matrix, clf: &Mlp, store: &ParamStore) -> Result<Matrix> {
    let expected = clf.input_dim(store);
    if embedding.rows() != 1 || embedding.cols() != expected {
        return Err(Error::shape("classify", embedding.shape(), (1, expected)));
    }
    let mut tape = Tape::new();
    let e = tape.constant(embedding.clone());
    let out = clf.forward(&mut tape, store, e)?;
    Ok(tape.value(out).clone())
}
