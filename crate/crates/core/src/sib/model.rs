use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::extract::{extract_selection, extract_subgraph, Extraction};
use super::objective::{assignment_on_tape, subgraph_embedding_on_tape, StatisticsNetwork, SubgraphGenerator};
use crate::error::{Error, Result};
use crate::gnn::{mean_readout, topk_attention_subgraph, AttentionReadout, Checkpoint, GcnEncoder, Mlp};
use crate::graphdata::{normalize_adjacency, Graph, Task};
use crate::numerics::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::rng::rng_for;

/// Which readout sits between the encoder and the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Learned assignment matrix trained on the bottleneck objective.
    Sib,
    /// Self-attention readout; subgraphs are the top-scored nodes.
    Att,
    /// Mean readout over all nodes.
    Gcn,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sib" => Ok(Mode::Sib),
            "att" => Ok(Mode::Att),
            "gcn" => Ok(Mode::Gcn),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected sib, att or gcn)"))),
        }
    }
}

/// How the assignment logits become a row-stochastic matrix while training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Relaxation {
    Softmax,
    Gumbel { tau: f64 },
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub mode: Mode,
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub task: Task,
    pub relaxation: Relaxation,
    /// Fraction of nodes kept by the attention baseline.
    pub att_ratio: f64,
    /// Membership threshold on `S[:, 0]`; `None` means argmax.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Head {
    Sib { generator: Mlp, statistics: StatisticsNetwork },
    Attention(AttentionReadout),
    Mean,
}

/// Values recorded for one graph on a tape.
pub struct GraphPass {
    pub x: Var,
    /// Assignment matrix (subgraph mode only).
    pub s: Option<Var>,
    /// Readout fed to the classifier.
    pub embedding: Var,
    /// Sum readout of the node embeddings.
    pub graph_embedding: Var,
    /// Attention scores (attention mode only).
    pub scores: Option<Var>,
    pub logits: Var,
}

/// All trainable parameters plus the layout that owns them.
#[derive(Clone, Debug)]
pub struct Model {
    pub arch: Architecture,
    pub store: ParamStore,
    pub encoder: GcnEncoder,
    pub classifier: Mlp,
    pub head: Head,
    statistics_init: Vec<Matrix>,
}

impl Model {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        if arch.hidden == 0 || arch.layers == 0 || arch.input_dim == 0 {
            return Err(Error::Config("input width, hidden width and layer count must be positive".into()));
        }
        let mut rng = rng_for(seed, 0);
        let mut store = ParamStore::new();
        let h = arch.hidden;
        let mut dims = vec![arch.input_dim];
        dims.extend(std::iter::repeat(h).take(arch.layers));
        let encoder = GcnEncoder::new(&mut store, "encoder", &dims, &mut rng);
        let head = match arch.mode {
            Mode::Sib => Head::Sib {
                generator: Mlp::new(&mut store, "generator", &[h, h, 2], &mut rng),
                statistics: StatisticsNetwork {
                    mlp: Mlp::new(&mut store, "statistics", &[2 * h, h, 1], &mut rng),
                },
            },
            Mode::Att => Head::Attention(AttentionReadout::new(&mut store, "attention", h, &mut rng)),
            Mode::Gcn => Head::Mean,
        };
        let classifier = Mlp::new(&mut store, "classifier", &[h, h, arch.task.output_dim()], &mut rng);
        let mut model = Self {
            arch,
            store,
            encoder,
            classifier,
            head,
            statistics_init: Vec::new(),
        };
        model.statistics_init = model.statistics_params().iter().map(|&id| model.store.get(id).clone()).collect();
        Ok(model)
    }

    pub fn generator(&self) -> Option<SubgraphGenerator> {
        match &self.head {
            Head::Sib { generator, .. } => Some(SubgraphGenerator {
                encoder: self.encoder.clone(),
                mlp: generator.clone(),
            }),
            _ => None,
        }
    }

    pub fn statistics(&self) -> Option<&StatisticsNetwork> {
        match &self.head {
            Head::Sib { statistics, .. } => Some(statistics),
            _ => None,
        }
    }

    /// Parameters of the statistics network (φ2).
    pub fn statistics_params(&self) -> Vec<ParamId> {
        self.statistics().map(|s| s.mlp.params()).unwrap_or_default()
    }

    /// Parameters updated by the outer step: encoder, generator or attention,
    /// and classifier.
    pub fn outer_params(&self) -> Vec<ParamId> {
        let mut ids = self.encoder.params();
        match &self.head {
            Head::Sib { generator, .. } => ids.extend(generator.params()),
            Head::Attention(att) => ids.extend(att.params()),
            Head::Mean => {}
        }
        ids.extend(self.classifier.params());
        ids
    }

    /// Restores φ2 to the values it had right after construction.
    pub fn reset_statistics(&mut self) {
        for (id, init) in self.statistics_params().into_iter().zip(self.statistics_init.clone()) {
            *self.store.get_mut(id) = init;
        }
    }

    fn check_width(&self, g: &Graph) -> Result<()> {
        if g.feature_dim() != self.arch.input_dim {
            return Err(Error::Domain(format!(
                "graph feature width {} does not match model input width {}",
                g.feature_dim(),
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    /// Records the forward pass of `g`. `noise` is added to the assignment
    /// logits before the temperature-scaled softmax (Gumbel relaxation).
    pub fn record(&self, tape: &mut Tape, g: &Graph, noise: Option<&Matrix>) -> Result<GraphPass> {
        self.check_width(g)?;
        let a = tape.constant(normalize_adjacency(g));
        let feats = tape.constant(g.features().clone());
        let x = self.encoder.forward(tape, &self.store, a, feats)?;
        let graph_embedding = tape.col_sums(x);
        let (s, embedding, scores) = match &self.head {
            Head::Sib { generator, .. } => {
                let s = assignment_on_tape(tape, &self.store, generator, x, self.temperature(), noise)?;
                let emb = subgraph_embedding_on_tape(tape, s, x)?;
                (Some(s), emb, None)
            }
            Head::Attention(att) => {
                let (emb, scores) = att.forward(tape, &self.store, x)?;
                (None, emb, Some(scores))
            }
            Head::Mean => (None, mean_readout(tape, x), None),
        };
        let logits = self.classifier.forward(tape, &self.store, embedding)?;
        Ok(GraphPass {
            x,
            s,
            embedding,
            graph_embedding,
            scores,
            logits,
        })
    }

    fn temperature(&self) -> f64 {
        match self.arch.relaxation {
            Relaxation::Softmax => 1.0,
            Relaxation::Gumbel { tau } => tau,
        }
    }

    /// Gumbel noise for one graph, or `None` under the plain softmax.
    pub fn gumbel_noise(&self, n: usize, seed: u64) -> Option<Matrix> {
        match self.arch.relaxation {
            Relaxation::Softmax => None,
            Relaxation::Gumbel { .. } => Some(gumbel_matrix(n, 2, seed)),
        }
    }

    /// Head output for `g` using the deterministic (noise-free) assignment.
    pub fn predict(&self, g: &Graph) -> Result<Matrix> {
        let mut tape = Tape::new();
        let pass = self.record(&mut tape, g, None)?;
        Ok(tape.value(pass.logits).clone())
    }

    /// Predicted class (argmax of the logits, lowest index on ties).
    pub fn predict_class(&self, g: &Graph) -> Result<usize> {
        let logits = self.predict(g)?;
        let row = logits.row(0);
        let mut best = 0;
        for (k, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Deterministic assignment matrix in subgraph mode.
    pub fn assignment(&self, g: &Graph) -> Result<Option<Matrix>> {
        let mut tape = Tape::new();
        let pass = self.record(&mut tape, g, None)?;
        Ok(pass.s.map(|s| tape.value(s).clone()))
    }

    /// Hard subgraph chosen by the model: thresholded assignment, top-k
    /// attention, or the whole graph for the mean readout.
    pub fn extract(&self, g: &Graph) -> Result<Extraction> {
        let mut tape = Tape::new();
        let pass = self.record(&mut tape, g, None)?;
        match (pass.s, pass.scores) {
            (Some(s), _) => extract_subgraph(g, tape.value(s), self.arch.threshold),
            (None, Some(scores)) => {
                let chosen = topk_attention_subgraph(tape.value(scores).data(), self.arch.att_ratio)?;
                extract_selection(g, &chosen)
            }
            (None, None) => extract_selection(g, &(0..g.n()).collect::<Vec<_>>()),
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let arch = serde_json::to_value(&self.arch).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Checkpoint::from_store(arch, &self.store))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch: Architecture = serde_json::from_value(ck.architecture.clone())
            .map_err(|e| Error::Domain(format!("checkpoint architecture: {e}")))?;
        let mut model = Model::new(arch, 0)?;
        ck.fill_store(&mut model.store)?;
        model.statistics_init = model.statistics_params().iter().map(|&id| model.store.get(id).clone()).collect();
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Independent standard Gumbel samples `−ln(−ln U)`.
pub fn gumbel_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_for(seed, 0);
    Matrix::from_fn(rows, cols, |_, _| {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        -(-u.ln()).ln()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::Label;

    pub(crate) fn arch(mode: Mode) -> Architecture {
        Architecture {
            mode,
            input_dim: 2,
            hidden: 4,
            layers: 2,
            task: Task::Classification { num_classes: 2 },
            relaxation: Relaxation::Softmax,
            att_ratio: 0.5,
            threshold: None,
        }
    }

    fn toy() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], Matrix::from_fn(4, 2, |i, j| (i + j) as f64 * 0.3))
            .unwrap()
            .with_label(Label::Class(1))
    }

    #[test]
    fn layouts_per_mode() {
        assert_eq!(Model::new(arch(Mode::Sib), 1).unwrap().store.len(), 2 + 4 + 4 + 4);
        assert_eq!(Model::new(arch(Mode::Att), 1).unwrap().store.len(), 2 + 2 + 4);
        assert_eq!(Model::new(arch(Mode::Gcn), 1).unwrap().store.len(), 2 + 4);
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        for mode in [Mode::Sib, Mode::Att, Mode::Gcn] {
            let model = Model::new(arch(mode), 3).unwrap();
            let tmp = tempfile::tempdir().unwrap();
            let path = tmp.path().join("ck.json");
            model.save(&path).unwrap();
            let back = Model::load(&path).unwrap();
            assert_eq!(back.store, model.store);
            assert_eq!(back.predict(&toy()).unwrap(), model.predict(&toy()).unwrap());
        }
    }

    #[test]
    fn width_mismatch_is_reported() {
        let model = Model::new(arch(Mode::Sib), 3).unwrap();
        let g = Graph::from_edges(2, &[(0, 1)], Matrix::ones(2, 5)).unwrap();
        assert!(matches!(model.predict(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn reset_restores_initial_statistics() {
        let mut model = Model::new(arch(Mode::Sib), 3).unwrap();
        let before = model.store.clone();
        let id = model.statistics_params()[0];
        model.store.get_mut(id).data_mut()[0] += 1.0;
        model.reset_statistics();
        assert_eq!(model.store, before);
    }

    #[test]
    fn extraction_by_mode() {
        let g = toy();
        assert_eq!(Model::new(arch(Mode::Gcn), 1).unwrap().extract(&g).unwrap().selected, vec![0, 1, 2, 3]);
        assert_eq!(Model::new(arch(Mode::Att), 1).unwrap().extract(&g).unwrap().selected.len(), 2);
    }
}
