//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is built fresh for every forward pass. Each recorded node keeps
//! its forward value and the operation that produced it; [`Tape::backward`]
//! walks the nodes in exact reverse order and accumulates gradients into one
//! buffer per node. Parameters enter the tape through [`Tape::param`], which
//! records at most one leaf per [`ParamId`] so contributions from every use
//! accumulate into the same buffer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::{self, Matrix};
use crate::error::{Error, Result};

/// Stable handle of a trainable tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named, ordered collection of trainable matrices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn set(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let current = &mut self.values[id.0];
        if current.shape() != value.shape() {
            return Err(Error::shape("ParamStore::set", current.shape(), value.shape()));
        }
        *current = value;
        Ok(())
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    AddRowBroadcast(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Transpose(Var),
    Relu(Var),
    Tanh(Var),
    RowSoftmax(Var),
    RowNormalize(Var, Vec<bool>),
    SumAll(Var),
    ColSums(Var),
    Row(Var, usize),
    SelectRows(Var, Vec<usize>),
    HCat(Var, Var),
    VStack(Vec<Var>),
    Frobenius(Var),
    LogSumExp(Var),
    CrossEntropy(Var, usize),
    Mse(Var, Matrix),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Record of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        debug_assert!(value.is_finite() || !matches!(op, Op::Leaf), "non-finite leaf");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.scalar()
    }

    /// Records a value that receives no parameter identity. Gradients still
    /// flow into it and can be read through [`Gradients::wrt`].
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records the current value of a parameter. Repeated calls with the same
    /// id return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        let v = self.push(store.get(id).clone(), Op::Leaf);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    /// Adds a 1×c row to every row of an r×c matrix.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (mv, rv) = (self.value(m), self.value(row));
        if rv.rows() != 1 || rv.cols() != mv.cols() {
            return Err(Error::shape("add_row", mv.shape(), rv.shape()));
        }
        let mut value = mv.clone();
        for i in 0..value.rows() {
            for (o, b) in value.row_mut(i).iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddRowBroadcast(m, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|v| v + c);
        self.push(value, Op::AddScalar(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).relu();
        self.push(value, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).tanh();
        self.push(value, Op::Tanh(a))
    }

    pub fn rowwise_softmax(&mut self, a: Var) -> Var {
        let value = matrix::rowwise_softmax(self.value(a));
        self.push(value, Op::RowSoftmax(a))
    }

    /// Row-wise normalization by the row sum; rows summing below `eps` become
    /// uniform and pass no gradient.
    pub fn row_normalize(&mut self, a: Var, eps: f64) -> Var {
        let (value, guarded) = matrix::row_normalize(self.value(a), eps);
        self.push(value, Op::RowNormalize(a, guarded))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Column sums (sum over rows) as a 1×c row.
    pub fn col_sums(&mut self, a: Var) -> Var {
        let value = self.value(a).col_sums();
        self.push(value, Op::ColSums(a))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let av = self.value(a);
        if i >= av.rows() {
            return Err(Error::Domain(format!("row {i} out of range for {} rows", av.rows())));
        }
        let value = Matrix::row_vector(av.row(i));
        Ok(self.push(value, Op::Row(a, i)))
    }

    pub fn select_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let value = self.value(a).select_rows(idx)?;
        Ok(self.push(value, Op::SelectRows(a, idx.to_vec())))
    }

    pub fn hcat(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hcat(self.value(b))?;
        Ok(self.push(value, Op::HCat(a, b)))
    }

    pub fn vstack(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Matrix> = parts.iter().map(|v| self.value(*v)).collect();
        let value = Matrix::vstack(&refs)?;
        Ok(self.push(value, Op::VStack(parts.to_vec())))
    }

    /// Sum of a list of equally shaped nodes.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Domain("add_n of an empty list".into()))?;
        let mut acc = *first;
        for p in rest {
            acc = self.add(acc, *p)?;
        }
        Ok(acc)
    }

    pub fn frobenius_norm(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).frobenius_norm());
        self.push(value, Op::Frobenius(a))
    }

    /// `ln Σ exp` over all entries.
    pub fn log_sum_exp(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, matrix::log_sum_exp(self.value(a).data()));
        self.push(value, Op::LogSumExp(a))
    }

    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let value = matrix::cross_entropy(self.value(logits), label)?;
        Ok(self.push(Matrix::filled(1, 1, value), Op::CrossEntropy(logits, label)))
    }

    pub fn mean_squared_error(&mut self, pred: Var, target: Matrix) -> Result<Var> {
        let value = matrix::mean_squared_error(self.value(pred), &target)?;
        Ok(self.push(Matrix::filled(1, 1, value), Op::Mse(pred, target)))
    }

    /// Reverse pass from a 1×1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::ones(1, 1));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let params = self
            .params
            .iter()
            .map(|(id, v)| {
                let g = grads[v.0]
                    .clone()
                    .unwrap_or_else(|| Matrix::zeros(self.value(*v).rows(), self.value(*v).cols()));
                (*id, g)
            })
            .collect();
        Ok(Gradients { nodes: grads, params })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ga = g.matmul(&val(*b).transpose()).expect("matmul grad");
                let gb = val(*a).transpose().matmul(g).expect("matmul grad");
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.scale(-1.0));
            }
            Op::Hadamard(a, b) => {
                accumulate(grads, *a, g.hadamard(val(*b)).expect("hadamard grad"));
                accumulate(grads, *b, g.hadamard(val(*a)).expect("hadamard grad"));
            }
            Op::AddRowBroadcast(m, row) => {
                accumulate(grads, *m, g.clone());
                accumulate(grads, *row, g.col_sums());
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.scale(*c)),
            Op::AddScalar(a) => accumulate(grads, *a, g.clone()),
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Relu(a) => {
                let x = val(*a);
                let mut d = g.clone();
                for (d, x) in d.data_mut().iter_mut().zip(x.data()) {
                    if *x <= 0.0 {
                        *d = 0.0;
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let mut d = g.clone();
                for (d, y) in d.data_mut().iter_mut().zip(y.data()) {
                    *d *= 1.0 - y * y;
                }
                accumulate(grads, *a, d);
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for ((o, y), g) in d.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = y * (g - dot);
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::RowNormalize(a, guarded) => {
                let x = val(*a);
                let y = &node.value;
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    if guarded[i] {
                        continue;
                    }
                    let total: f64 = x.row(i).iter().sum();
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for (o, g) in d.row_mut(i).iter_mut().zip(gr) {
                        *o = (g - dot) / total;
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::SumAll(a) => {
                let x = val(*a);
                accumulate(grads, *a, Matrix::filled(x.rows(), x.cols(), g.scalar()));
            }
            Op::ColSums(a) => {
                let x = val(*a);
                let d = Matrix::from_fn(x.rows(), x.cols(), |_, j| g.get(0, j));
                accumulate(grads, *a, d);
            }
            Op::Row(a, i) => {
                let x = val(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                d.row_mut(*i).copy_from_slice(g.data());
                accumulate(grads, *a, d);
            }
            Op::SelectRows(a, idx) => {
                let x = val(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for (k, &i) in idx.iter().enumerate() {
                    for (o, v) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::HCat(a, b) => {
                let ca = val(*a).cols();
                let da = Matrix::from_fn(g.rows(), ca, |i, j| g.get(i, j));
                let db = Matrix::from_fn(g.rows(), g.cols() - ca, |i, j| g.get(i, ca + j));
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::VStack(parts) => {
                let mut offset = 0;
                for p in parts {
                    let r = val(*p).rows();
                    let d = Matrix::from_fn(r, g.cols(), |i, j| g.get(offset + i, j));
                    offset += r;
                    accumulate(grads, *p, d);
                }
            }
            Op::Frobenius(a) => {
                let norm = node.value.scalar();
                if norm > 0.0 {
                    accumulate(grads, *a, val(*a).scale(g.scalar() / norm));
                }
            }
            Op::LogSumExp(a) => {
                let x = val(*a);
                let lse = node.value.scalar();
                let d = x.map(|v| (v - lse).exp() * g.scalar());
                accumulate(grads, *a, d);
            }
            Op::CrossEntropy(logits, label) => {
                let mut d = matrix::rowwise_softmax(val(*logits));
                d.data_mut()[*label] -= 1.0;
                accumulate(grads, *logits, d.scale(g.scalar()));
            }
            Op::Mse(pred, target) => {
                let p = val(*pred);
                let c = 2.0 * g.scalar() / p.len() as f64;
                let d = p.sub(target).expect("mse grad").scale(c);
                accumulate(grads, *pred, d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, d: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.axpy(1.0, &d).expect("gradient shape"),
        slot @ None => *slot = Some(d),
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    nodes: Vec<Option<Matrix>>,
    params: BTreeMap<ParamId, Matrix>,
}

impl Gradients {
    /// Wraps externally accumulated parameter gradients, e.g. a sum over
    /// several tapes.
    pub fn from_params(params: BTreeMap<ParamId, Matrix>) -> Self {
        Self {
            nodes: Vec::new(),
            params,
        }
    }

    pub fn into_params(self) -> BTreeMap<ParamId, Matrix> {
        self.params
    }

    /// Gradient of a parameter recorded on the tape; all-zero when the loss
    /// does not depend on it. `None` if the parameter never entered the tape.
    pub fn param(&self, id: ParamId) -> Option<&Matrix> {
        self.params.get(&id)
    }

    /// Gradient with respect to any recorded node.
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.params.iter().map(|(k, v)| (*k, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_weights_has_unit_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]));
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let loss = tape.sum(wv);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(w).unwrap(), &Matrix::ones(2, 2));
    }

    #[test]
    fn squared_frobenius_gradient_is_twice_w() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]));
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let sq = tape.hadamard(wv, wv).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(w).unwrap(), &store.get(w).scale(2.0));
    }

    #[test]
    fn unused_parameter_gradient_is_exactly_zero() {
        let mut store = ParamStore::new();
        let a = store.add("a", Matrix::ones(2, 2));
        let b = store.add("b", Matrix::ones(3, 1));
        let mut tape = Tape::new();
        let av = tape.param(&store, a);
        let _bv = tape.param(&store, b);
        let loss = tape.sum(av);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(b).unwrap(), &Matrix::zeros(3, 1));
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let mut tape = Tape::new();
        let v = tape.constant(Matrix::ones(2, 1));
        assert!(matches!(tape.backward(v), Err(Error::Contract(_))));
    }

    #[test]
    fn repeated_param_shares_one_leaf() {
        let mut store = ParamStore::new();
        let a = store.add("a", Matrix::filled(1, 1, 3.0));
        let mut tape = Tape::new();
        let x = tape.param(&store, a);
        let y = tape.param(&store, a);
        assert_eq!(x, y);
        let p = tape.hadamard(x, y).unwrap();
        let grads = tape.backward(p).unwrap();
        assert_eq!(grads.param(a).unwrap().scalar(), 6.0);
    }
}
