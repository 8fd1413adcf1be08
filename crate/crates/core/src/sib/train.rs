use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, GraphPass, Mode, Model, Relaxation};
use super::objective::{connectivity_on_tape, label_loss_on_tape, mi_on_tape};
use crate::error::{Error, Result};
use crate::graphdata::{drop_edges, Dataset, Graph, Label, Task};
use crate::numerics::{sgd_step, Adam, Direction, Gradients, Matrix, ParamId, ParamStore, Tape, Var};
use crate::rng::{derive_seed, rng_for};

const FORWARD_STREAM: u64 = 1 << 32;
const BATCH_STREAM: u64 = 2 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxKind {
    Softmax,
    Gumbel,
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the connectivity loss.
    pub alpha: f64,
    /// Weight of the mutual-information term.
    pub beta: f64,
    pub inner_steps: usize,
    pub outer_steps: usize,
    /// Inner (statistics network) learning rate, plain gradient ascent.
    pub eta1: f64,
    /// Outer learning rate (Adam).
    pub eta2: f64,
    pub seed: u64,
    pub relaxation: RelaxKind,
    /// Gumbel temperature.
    pub tau: f64,
    /// Reset the statistics network to its initial values before each inner loop.
    pub reinit_statistics: bool,
    /// Graphs per outer step; 0 means the whole training split.
    pub batch_size: usize,
    /// Fraction of edges dropped from each training graph at every step.
    pub drop_edge: f64,
    pub mode: Mode,
    pub att_ratio: f64,
    pub hidden: usize,
    pub layers: usize,
    /// Membership threshold on `S[:, 0]`; `None` means argmax.
    pub threshold: Option<f64>,
    /// Keep the parameters with the best validation accuracy.
    pub select_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            beta: 0.1,
            inner_steps: 20,
            outer_steps: 100,
            eta1: 0.01,
            eta2: 0.01,
            seed: 0,
            relaxation: RelaxKind::Softmax,
            tau: 1.0,
            reinit_statistics: true,
            batch_size: 0,
            drop_edge: 0.0,
            mode: Mode::Sib,
            att_ratio: 0.5,
            hidden: 16,
            layers: 2,
            threshold: None,
            select_best: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for key {key}")))
}

impl TrainConfig {
    /// Keys accepted by [`TrainConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "alpha",
        "beta",
        "inner_steps",
        "outer_steps",
        "eta1",
        "eta2",
        "seed",
        "relaxation",
        "tau",
        "reinit_statistics",
        "batch_size",
        "drop_edge",
        "mode",
        "att_ratio",
        "hidden",
        "layers",
        "threshold",
        "select_best",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "inner_steps" => self.inner_steps = parse(key, value)?,
            "outer_steps" => self.outer_steps = parse(key, value)?,
            "eta1" => self.eta1 = parse(key, value)?,
            "eta2" => self.eta2 = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "relaxation" => {
                self.relaxation = match value {
                    "softmax" => RelaxKind::Softmax,
                    "gumbel" => RelaxKind::Gumbel,
                    _ => return Err(Error::Config(format!("invalid value {value:?} for key relaxation"))),
                }
            }
            "tau" => self.tau = parse(key, value)?,
            "reinit_statistics" => self.reinit_statistics = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "drop_edge" => self.drop_edge = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "att_ratio" => self.att_ratio = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "threshold" => {
                self.threshold = if value == "argmax" { None } else { Some(parse(key, value)?) };
            }
            "select_best" => self.select_best = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.inner_steps < 1 {
            return fail("inner_steps must be at least 1");
        }
        if self.outer_steps < 1 {
            return fail("outer_steps must be at least 1");
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return fail("learning rates eta1 and eta2 must be positive");
        }
        if !(self.tau > 0.0) {
            return fail("tau must be positive");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return fail("alpha and beta must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.drop_edge) {
            return fail("drop_edge must lie in [0, 1)");
        }
        if !(self.att_ratio > 0.0 && self.att_ratio <= 1.0) {
            return fail("att_ratio must lie in (0, 1]");
        }
        if self.hidden == 0 || self.layers == 0 {
            return fail("hidden and layers must be positive");
        }
        if self.batch_size == 1 && self.mode == Mode::Sib {
            return fail("batch_size must be 0 or at least 2: the mutual information estimate pairs graphs");
        }
        Ok(())
    }

    pub fn architecture(&self, input_dim: usize, task: Task) -> Architecture {
        Architecture {
            mode: self.mode,
            input_dim,
            hidden: self.hidden,
            layers: self.layers,
            task,
            relaxation: match self.relaxation {
                RelaxKind::Softmax => Relaxation::Softmax,
                RelaxKind::Gumbel => Relaxation::Gumbel { tau: self.tau },
            },
            att_ratio: self.att_ratio,
            threshold: self.threshold,
        }
    }
}

/// Loss terms of one outer step; `total = l_cls + α·l_con + β·l_mi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_cls: f64,
    pub l_con: f64,
    pub l_mi: f64,
    pub total: f64,
}

/// One line of the training trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub l_cls: f64,
    pub l_con: f64,
    pub l_mi: f64,
    pub total: f64,
    pub val_acc: Option<f64>,
    /// Inner-loop estimates, before the first and after every ascent step.
    #[serde(skip)]
    pub mi_trace: Vec<f64>,
}

/// A trained model and its trace.
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<TrainRecord>,
    /// Step whose parameters were kept when selecting on validation accuracy.
    pub selected_step: Option<usize>,
}

/// Per-graph tape with the values the outer step needs.
pub struct GraphForward {
    tape: Tape,
    pass: GraphPass,
    cls: Var,
    con: Option<Var>,
}

/// Forward passes of one batch, in batch order.
pub struct BatchForward {
    graphs: Vec<GraphForward>,
    /// Sum readouts, one row per graph.
    pub graph_embs: Matrix,
    /// Classifier inputs, one row per graph.
    pub sub_embs: Matrix,
}

fn forward_graph(model: &Model, g: &Graph, index: usize, cfg: &TrainConfig, step: usize) -> Result<GraphForward> {
    let stream = derive_seed(derive_seed(cfg.seed, FORWARD_STREAM + step as u64), index as u64);
    let input = if cfg.drop_edge > 0.0 {
        Cow::Owned(drop_edges(g, cfg.drop_edge, derive_seed(stream, 1))?)
    } else {
        Cow::Borrowed(g)
    };
    let noise = model.gumbel_noise(g.n(), derive_seed(stream, 2));
    let mut tape = Tape::new();
    let pass = model.record(&mut tape, &input, noise.as_ref())?;
    let cls = label_loss_on_tape(&mut tape, pass.logits, g.label)?;
    let con = match pass.s {
        Some(s) => {
            let a = tape.constant(g.adjacency().clone());
            Some(connectivity_on_tape(&mut tape, s, a)?)
        }
        None => None,
    };
    Ok(GraphForward { tape, pass, cls, con })
}

/// Records every graph of the batch on its own tape, in parallel.
/// `batch` pairs dataset indices (which key the random streams) with graphs.
pub fn forward_batch(model: &Model, batch: &[(usize, &Graph)], cfg: &TrainConfig, step: usize) -> Result<BatchForward> {
    let graphs = batch
        .par_iter()
        .map(|&(i, g)| forward_graph(model, g, i, cfg, step))
        .collect::<Result<Vec<_>>>()?;
    let ge: Vec<&Matrix> = graphs.iter().map(|f| f.tape.value(f.pass.graph_embedding)).collect();
    let se: Vec<&Matrix> = graphs.iter().map(|f| f.tape.value(f.pass.embedding)).collect();
    let graph_embs = Matrix::vstack(&ge)?;
    let sub_embs = Matrix::vstack(&se)?;
    Ok(BatchForward {
        graphs,
        graph_embs,
        sub_embs,
    })
}

/// Trains the statistics network on fixed embeddings by `steps` steps of
/// gradient ascent on the DV estimate, after resetting it to its initial
/// values when `reinit` is set. Returns the estimate before the first step
/// and after each step.
pub fn inner_loop(
    model: &mut Model,
    graph_embs: &Matrix,
    sub_embs: &Matrix,
    steps: usize,
    eta1: f64,
    reinit: bool,
) -> Result<Vec<f64>> {
    let net = model
        .statistics()
        .cloned()
        .ok_or_else(|| Error::Contract("inner loop requires a model in subgraph mode".into()))?;
    if reinit {
        model.reset_statistics();
    }
    let ids = net.mlp.params();
    let mut trace = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let mut tape = Tape::new();
        let g = tape.constant(graph_embs.clone());
        let s = tape.constant(sub_embs.clone());
        let mi = mi_on_tape(&mut tape, &model.store, &net, g, s)?;
        trace.push(tape.scalar(mi));
        if t == steps {
            break;
        }
        let grads = tape.backward(mi)?;
        sgd_step(&mut model.store, &ids, &grads, eta1, Direction::Ascend)?;
        if let Some(bad) = first_non_finite(&model.store, &ids) {
            trace.push(bad);
            break;
        }
    }
    Ok(trace)
}

fn scalar_row(m: &Matrix, i: usize) -> Matrix {
    Matrix::row_vector(m.row(i))
}

/// Loss terms and gradients of `L = L_cls + α·L_con + β·L_MI` with respect
/// to the encoder, readout and classifier, with the statistics network
/// frozen.
pub fn outer_gradients(model: &Model, fwd: BatchForward, alpha: f64, beta: f64) -> Result<(LossBreakdown, Gradients)> {
    let b = fwd.graphs.len();
    if b == 0 {
        return Err(Error::Contract("outer step on an empty batch".into()));
    }
    let inv = 1.0 / b as f64;
    let l_cls: f64 = fwd.graphs.iter().map(|f| f.tape.scalar(f.cls)).sum::<f64>() * inv;
    let l_con: f64 = fwd
        .graphs
        .iter()
        .map(|f| f.con.map_or(0.0, |c| f.tape.scalar(c)))
        .sum::<f64>()
        * inv;

    let (l_mi, mi_grads) = match model.statistics().cloned() {
        Some(net) => {
            let mut tape = Tape::new();
            let g = tape.constant(fwd.graph_embs.clone());
            let s = tape.constant(fwd.sub_embs.clone());
            let mi = mi_on_tape(&mut tape, &model.store, &net, g, s)?;
            let grads = tape.backward(mi)?;
            let dg = grads.wrt(g).cloned().unwrap_or_else(|| Matrix::zeros(b, fwd.graph_embs.cols()));
            let ds = grads.wrt(s).cloned().unwrap_or_else(|| Matrix::zeros(b, fwd.sub_embs.cols()));
            (tape.scalar(mi), Some((dg, ds)))
        }
        None => (0.0, None),
    };
    let total = l_cls + alpha * l_con + beta * l_mi;

    // Each graph's share of L as a scalar on its own tape; the MI term enters
    // through its exact gradient with respect to the two embeddings.
    let per_graph: Vec<Gradients> = fwd
        .graphs
        .into_par_iter()
        .enumerate()
        .map(|(i, mut f)| {
            let mut local = f.tape.scale(f.cls, inv);
            if let Some(c) = f.con {
                let c = f.tape.scale(c, alpha * inv);
                local = f.tape.add(local, c)?;
            }
            if let Some((dg, ds)) = &mi_grads {
                let wg = f.tape.constant(scalar_row(dg, i).scale(beta));
                let ws = f.tape.constant(scalar_row(ds, i).scale(beta));
                let pg = f.tape.hadamard(wg, f.pass.graph_embedding)?;
                let ps = f.tape.hadamard(ws, f.pass.embedding)?;
                let pg = f.tape.sum(pg);
                let ps = f.tape.sum(ps);
                local = f.tape.add_n(&[local, pg, ps])?;
            }
            f.tape.backward(local)
        })
        .collect::<Result<Vec<_>>>()?;

    let ids = model.outer_params();
    let mut summed: BTreeMap<ParamId, Matrix> = BTreeMap::new();
    for grads in per_graph {
        for (id, g) in grads.into_params() {
            match summed.get_mut(&id) {
                Some(acc) => acc.axpy(1.0, &g)?,
                None => {
                    summed.insert(id, g);
                }
            }
        }
    }
    summed.retain(|id, _| ids.contains(id));
    let loss = LossBreakdown {
        l_cls,
        l_con,
        l_mi,
        total,
    };
    Ok((loss, Gradients::from_params(summed)))
}

/// One Adam descent step on [`outer_gradients`].
pub fn outer_step(model: &mut Model, adam: &mut Adam, fwd: BatchForward, alpha: f64, beta: f64) -> Result<LossBreakdown> {
    let (loss, grads) = outer_gradients(model, fwd, alpha, beta)?;
    let ids = model.outer_params();
    adam.step(&mut model.store, &ids, &grads)?;
    Ok(loss)
}

/// Fraction of correctly classified graphs; `None` for empty sets or
/// scalar labels.
pub fn accuracy_on(model: &Model, graphs: &[&Graph]) -> Result<Option<f64>> {
    if graphs.is_empty() || !matches!(model.arch.task, Task::Classification { .. }) {
        return Ok(None);
    }
    let hits = graphs
        .par_iter()
        .map(|g| {
            let pred = model.predict_class(g)?;
            Ok(usize::from(g.label == Some(Label::Class(pred))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(hits.iter().sum::<usize>() as f64 / graphs.len() as f64))
}

fn batch_for_step(train: &[usize], batch_size: usize, seed: u64, step: usize) -> Vec<usize> {
    let n = train.len();
    if batch_size == 0 || batch_size >= n {
        return train.to_vec();
    }
    let per_epoch = n / batch_size;
    let epoch = step / per_epoch;
    let k = step % per_epoch;
    let mut order = train.to_vec();
    order.shuffle(&mut rng_for(seed, BATCH_STREAM + epoch as u64));
    let end = if k + 1 == per_epoch { n } else { (k + 1) * batch_size };
    order[k * batch_size..end].to_vec()
}

fn first_non_finite(store: &ParamStore, ids: &[ParamId]) -> Option<f64> {
    ids.iter()
        .flat_map(|&id| store.get(id).data().iter().copied())
        .find(|v| !v.is_finite())
}

fn check_finite(step: usize, component: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { step, component, value })
    }
}

/// Runs `cfg.outer_steps` bi-level steps on the training split.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(ds, cfg, |_| {})
}

/// As [`train`], handing every trace record to `on_record` as it is produced.
pub fn train_with(ds: &Dataset, cfg: &TrainConfig, mut on_record: impl FnMut(&TrainRecord)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_idx = &ds.splits.train;
    if train_idx.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if cfg.mode == Mode::Sib && train_idx.len() < 2 {
        return Err(Error::Config("subgraph mode needs at least 2 training graphs".into()));
    }
    let mut model = Model::new(cfg.architecture(ds.meta.feature_dim, ds.meta.task.clone()), cfg.seed)?;
    let mut adam = Adam::new(cfg.eta2);
    let val: Vec<&Graph> = ds.subset(&ds.splits.val);
    let mut trace = Vec::with_capacity(cfg.outer_steps);
    let mut best: Option<(f64, usize, ParamStore)> = None;

    for step in 0..cfg.outer_steps {
        let idx = batch_for_step(train_idx, cfg.batch_size, cfg.seed, step);
        let batch: Vec<(usize, &Graph)> = idx.iter().map(|&i| (i, &ds.graphs[i])).collect();
        let fwd = forward_batch(&model, &batch, cfg, step)?;
        let mi_trace = if cfg.mode == Mode::Sib {
            let t = inner_loop(
                &mut model,
                &fwd.graph_embs,
                &fwd.sub_embs,
                cfg.inner_steps,
                cfg.eta1,
                cfg.reinit_statistics,
            )?;
            for v in &t {
                check_finite(step, "l_mi", *v)?;
            }
            t
        } else {
            Vec::new()
        };
        let loss = outer_step(&mut model, &mut adam, fwd, cfg.alpha, cfg.beta)?;
        check_finite(step, "l_cls", loss.l_cls)?;
        check_finite(step, "l_con", loss.l_con)?;
        check_finite(step, "l_mi", loss.l_mi)?;
        check_finite(step, "total", loss.total)?;
        if let Some(bad) = first_non_finite(&model.store, &model.outer_params()) {
            return Err(Error::Divergence { step, component: "parameters", value: bad });
        }
        let val_acc = accuracy_on(&model, &val)?;
        let record = TrainRecord {
            step,
            l_cls: loss.l_cls,
            l_con: loss.l_con,
            l_mi: loss.l_mi,
            total: loss.total,
            val_acc,
            mi_trace,
        };
        log::debug!(
            "step {step}: l_cls {:.4} l_con {:.4} l_mi {:.4} val_acc {:?}",
            record.l_cls,
            record.l_con,
            record.l_mi,
            record.val_acc
        );
        on_record(&record);
        trace.push(record);
        if cfg.select_best {
            if let Some(acc) = val_acc {
                if best.as_ref().map_or(true, |(b, _, _)| acc >= *b) {
                    best = Some((acc, step, model.store.clone()));
                }
            }
        }
    }

    let selected_step = match best {
        Some((_, step, store)) => {
            model.store = store;
            Some(step)
        }
        None => None,
    };
    Ok(TrainOutcome {
        model,
        trace,
        selected_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{generate_planted_motif, split_dataset, DatasetMeta, Splits};
    use crate::numerics::{grad_check, ParamStore};

    fn toy() -> Dataset {
        let graphs = (0..4)
            .map(|i| {
                let n = 3 + i;
                let edges: Vec<(usize, usize)> = (0..n - 1).map(|u| (u, u + 1)).collect();
                Graph::from_edges(n, &edges, Matrix::from_fn(n, 2, |v, j| ((v + j + i) % 3) as f64))
                    .unwrap()
                    .with_label(Label::Class(i % 2))
            })
            .collect();
        Dataset {
            graphs,
            splits: Splits::all_train(4),
            meta: DatasetMeta {
                name: "toy".into(),
                feature_dim: 2,
                task: Task::Classification { num_classes: 2 },
                class_values: vec![0, 1],
                node_label_values: vec![],
            },
        }
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            outer_steps: 1,
            inner_steps: 1,
            hidden: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn smoke_single_step() {
        let out = train(&toy(), &small_cfg()).unwrap();
        assert_eq!(out.trace.len(), 1);
        let r = &out.trace[0];
        assert_eq!(r.total, r.l_cls + 5.0 * r.l_con + 0.1 * r.l_mi);
        assert!(r.l_con >= 0.0 && r.l_cls >= 0.0);
        assert_eq!(r.mi_trace.len(), 2);
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = TrainConfig {
            outer_steps: 3,
            inner_steps: 2,
            hidden: 4,
            relaxation: RelaxKind::Gumbel,
            tau: 0.5,
            drop_edge: 0.3,
            ..TrainConfig::default()
        };
        let a = train(&toy(), &cfg).unwrap();
        let b = train(&toy(), &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model.store, b.model.store);
    }

    #[test]
    fn zero_inner_rate_keeps_reinitialized_statistics() {
        let ds = toy();
        let cfg = small_cfg();
        let mut model = Model::new(cfg.architecture(2, ds.meta.task.clone()), 5).unwrap();
        let init = model.store.clone();
        let id = model.statistics_params()[0];
        model.store.get_mut(id).data_mut()[0] += 3.0;
        let batch: Vec<(usize, &Graph)> = ds.graphs.iter().enumerate().collect();
        let fwd = forward_batch(&model, &batch, &cfg, 0).unwrap();
        let trace = inner_loop(&mut model, &fwd.graph_embs, &fwd.sub_embs, 1, 0.0, true).unwrap();
        assert_eq!(model.store, init);
        assert!(trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn inner_loop_ascends() {
        let ds = generate_planted_motif(16, 4, 4, 0.3, 2).unwrap();
        let cfg = TrainConfig {
            hidden: 8,
            ..TrainConfig::default()
        };
        let mut model = Model::new(cfg.architecture(ds.meta.feature_dim, ds.meta.task.clone()), 1).unwrap();
        let batch: Vec<(usize, &Graph)> = ds.graphs.iter().enumerate().collect();
        let fwd = forward_batch(&model, &batch, &cfg, 0).unwrap();
        let trace = inner_loop(&mut model, &fwd.graph_embs, &fwd.sub_embs, 20, 0.01, true).unwrap();
        assert!(trace[20] >= trace[0], "{trace:?}");
    }

    #[test]
    fn zero_outer_rate_leaves_parameters() {
        let ds = toy();
        let cfg = small_cfg();
        let mut model = Model::new(cfg.architecture(2, ds.meta.task.clone()), 5).unwrap();
        let batch: Vec<(usize, &Graph)> = ds.graphs.iter().enumerate().collect();
        let fwd = forward_batch(&model, &batch, &cfg, 0).unwrap();
        let before = model.store.clone();
        let loss = outer_step(&mut model, &mut Adam::new(0.0), fwd, 5.0, 0.1).unwrap();
        assert_eq!(model.store, before);
        assert_eq!(loss.total, loss.l_cls + 5.0 * loss.l_con + 0.1 * loss.l_mi);
    }

    /// The loss the outer step descends, rebuilt on one tape per call.
    fn full_loss(model: &Model, store: &ParamStore, graphs: &[Graph], alpha: f64, beta: f64, tape: &mut Tape) -> Result<Var> {
        let mut m = model.clone();
        m.store = store.clone();
        let inv = 1.0 / graphs.len() as f64;
        let mut terms = Vec::new();
        let mut ge = Vec::new();
        let mut se = Vec::new();
        for g in graphs {
            // parameters must be leaves of this tape, so record directly
            let pass = m.record(tape, g, None)?;
            let cls = label_loss_on_tape(tape, pass.logits, g.label)?;
            let a = tape.constant(g.adjacency().clone());
            let con = connectivity_on_tape(tape, pass.s.unwrap(), a)?;
            let cls = tape.scale(cls, inv);
            let con = tape.scale(con, alpha * inv);
            terms.push(cls);
            terms.push(con);
            ge.push(pass.graph_embedding);
            se.push(pass.embedding);
        }
        let g = tape.vstack(&ge)?;
        let s = tape.vstack(&se)?;
        let mi = mi_on_tape(tape, store, m.statistics().unwrap(), g, s)?;
        terms.push(tape.scale(mi, beta));
        tape.add_n(&terms)
    }

    #[test]
    fn outer_gradient_matches_single_tape_loss() {
        let ds = toy();
        let cfg = small_cfg();
        let model = Model::new(cfg.architecture(2, ds.meta.task.clone()), 9).unwrap();
        let batch: Vec<(usize, &Graph)> = ds.graphs.iter().enumerate().collect();
        let params = model.outer_params();
        for (alpha, beta) in [(5.0, 0.1), (0.0, 0.0), (1.0, 2.0)] {
            let fwd = forward_batch(&model, &batch, &cfg, 0).unwrap();
            let (_, grads) = outer_gradients(&model, fwd, alpha, beta).unwrap();
            let mut tape = Tape::new();
            let loss = full_loss(&model, &model.store, &ds.graphs, alpha, beta, &mut tape).unwrap();
            let direct = tape.backward(loss).unwrap();
            for &id in &params {
                let d = grads.param(id).unwrap().max_abs_diff(direct.param(id).unwrap());
                assert!(d < 1e-12, "{} differs by {d}", model.store.name(id));
            }
        }
        let rep = grad_check(
            |s, t| full_loss(&model, s, &ds.graphs, 5.0, 0.1, t),
            &model.store,
            &params,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn planted_training_runs() {
        let ds = generate_planted_motif(20, 4, 4, 0.3, 1).unwrap();
        let ds = split_dataset(&ds, (0.6, 0.2, 0.2), 1).unwrap();
        let cfg = TrainConfig {
            outer_steps: 3,
            inner_steps: 2,
            hidden: 4,
            ..TrainConfig::default()
        };
        for mode in [Mode::Sib, Mode::Att, Mode::Gcn] {
            let out = train(&ds, &TrainConfig { mode, ..cfg.clone() }).unwrap();
            assert_eq!(out.trace.len(), 3);
            assert!(out.trace.iter().all(|r| r.val_acc.is_some()));
            assert!(out.selected_step.is_some());
        }
    }

    #[test]
    fn config_keys_round_trip() {
        let mut cfg = TrainConfig::default();
        for (k, v) in [("alpha", "2.5"), ("mode", "att"), ("threshold", "0.7"), ("relaxation", "gumbel")] {
            cfg.set(k, v).unwrap();
        }
        assert_eq!(cfg.alpha, 2.5);
        assert_eq!(cfg.mode, Mode::Att);
        assert_eq!(cfg.threshold, Some(0.7));
        assert!(matches!(cfg.set("nope", "1"), Err(Error::Config(_))));
        assert!(cfg.set("alpha", "x").is_err());
        assert!(TrainConfig { inner_steps: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { tau: 0.0, ..TrainConfig::default() }.validate().is_err());
        for k in TrainConfig::KEYS {
            assert!(TrainConfig::default().set(k, "bogus").is_err(), "{k}");
        }
    }
}
