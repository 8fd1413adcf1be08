use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{component_stats, node_pr, random_pr, size_stats, MeanStd};
use crate::error::{Error, Result};
use crate::graphdata::{Graph, Label};
use crate::sib::{Extraction, Model};

/// What the nodes of the evaluated graphs stand for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TruthKind {
    /// Nodes of the original graph.
    #[default]
    Nodes,
    /// Line-graph nodes, i.e. edges of the original graph.
    Edges,
}

/// Scalar property recomputed on extracted subgraphs.
pub type PropertyFn<'a> = &'a (dyn Fn(&Graph) -> f64 + Sync);

#[derive(Clone, Copy, Default)]
pub struct EvalOptions<'a> {
    pub truth: TruthKind,
    pub property: Option<PropertyFn<'a>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyBias {
    pub bias: MeanStd,
    /// Graphs whose extraction was empty; their bias is `|Y(G)|`.
    pub empty: usize,
}

/// Evaluation of one model on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub graphs: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node_precision: Option<MeanStd>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node_recall: Option<MeanStd>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge_precision: Option<MeanStd>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge_recall: Option<MeanStd>,
    /// Expected precision of a random selection of the same size.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub random_precision: Option<f64>,
    /// Expected recall of a random selection of the same size.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub random_recall: Option<f64>,
    /// Mean fraction of unmarked nodes among the selected ones.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selected_noise_fraction: Option<f64>,
    /// Mean fraction of unmarked nodes in the whole graph.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub graph_noise_fraction: Option<f64>,
    pub subgraph_size_pct: MeanStd,
    pub largest_component_pct: MeanStd,
    pub disconnected_parts: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub property_bias: Option<PropertyBias>,
    pub empty_selections: usize,
}

struct PerGraph {
    n: usize,
    correct: Option<bool>,
    sq_error: Option<f64>,
    extraction: Extraction,
    parts: usize,
    pr: Option<(f64, f64)>,
    random: Option<(f64, f64)>,
    noise: Option<(Option<f64>, f64)>,
    bias: Option<(f64, bool)>,
}

fn bias_of(g: &Graph, ex: &Extraction, property: PropertyFn<'_>) -> Result<Option<(f64, bool)>> {
    let Some(Label::Scalar(y)) = g.label else {
        return Ok(None);
    };
    if ex.largest_component.is_empty() {
        return Ok(Some((y.abs(), true)));
    }
    let sub = g.induced(&ex.largest_component)?;
    Ok(Some(((y - property(&sub)).abs(), false)))
}

fn evaluate_graph(model: &Model, g: &Graph, opts: &EvalOptions<'_>) -> Result<PerGraph> {
    let logits = model.predict(g)?;
    let (correct, sq_error) = match g.label {
        Some(Label::Class(c)) => (Some(model.predict_class(g)? == c), None),
        Some(Label::Scalar(y)) => (None, Some((logits.get(0, 0) - y).powi(2))),
        None => (None, None),
    };
    let extraction = model.extract(g)?;
    let parts = component_stats(g, &extraction.selected).count;
    let (pr, random, noise) = match g.node_truth() {
        Some(mask) => {
            let p = node_pr(&extraction.selected, Some(mask))?;
            let rand = random_pr(extraction.selected.len(), mask);
            let graph_noise = 1.0 - rand.0;
            let sel_noise = (!p.empty_selection).then(|| 1.0 - p.precision);
            (Some((p.precision, p.recall)), Some(rand), Some((sel_noise, graph_noise)))
        }
        None => (None, None, None),
    };
    let bias = match opts.property {
        Some(f) => bias_of(g, &extraction, f)?,
        None => None,
    };
    Ok(PerGraph {
        n: g.n(),
        correct,
        sq_error,
        extraction,
        parts,
        pr,
        random,
        noise,
        bias,
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    MeanStd::of(values).map(|m| m.mean)
}

/// Runs the model on every graph and aggregates the metrics. Fields that
/// need labels, truth masks or a property function are left out when the
/// graphs lack them.
pub fn evaluate(model: &Model, graphs: &[&Graph], opts: &EvalOptions<'_>) -> Result<MetricsRecord> {
    if graphs.is_empty() {
        return Err(Error::Domain("evaluation split is empty".into()));
    }
    let per: Vec<PerGraph> = graphs
        .par_iter()
        .map(|g| evaluate_graph(model, g, opts))
        .collect::<Result<Vec<_>>>()?;

    let correct: Vec<f64> = per.iter().filter_map(|p| p.correct.map(|c| f64::from(u8::from(c)))).collect();
    let sq: Vec<f64> = per.iter().filter_map(|p| p.sq_error).collect();
    let precision: Vec<f64> = per.iter().filter_map(|p| p.pr.map(|x| x.0)).collect();
    let recall: Vec<f64> = per.iter().filter_map(|p| p.pr.map(|x| x.1)).collect();
    let rand_p: Vec<f64> = per.iter().filter_map(|p| p.random.map(|x| x.0)).collect();
    let rand_r: Vec<f64> = per.iter().filter_map(|p| p.random.map(|x| x.1)).collect();
    let sel_noise: Vec<f64> = per.iter().filter_map(|p| p.noise.and_then(|x| x.0)).collect();
    let graph_noise: Vec<f64> = per.iter().filter_map(|p| p.noise.map(|x| x.1)).collect();
    let biases: Vec<f64> = per.iter().filter_map(|p| p.bias.map(|x| x.0)).collect();
    let sizes: Vec<(usize, usize, usize)> = per
        .iter()
        .map(|p| (p.n, p.extraction.selected.len(), p.extraction.largest_component.len()))
        .collect();
    let size = size_stats(&sizes)?;
    let parts: Vec<f64> = per.iter().map(|p| p.parts as f64).collect();

    let (node_precision, node_recall, edge_precision, edge_recall) = match opts.truth {
        TruthKind::Nodes => (MeanStd::of(&precision), MeanStd::of(&recall), None, None),
        TruthKind::Edges => (None, None, MeanStd::of(&precision), MeanStd::of(&recall)),
    };
    Ok(MetricsRecord {
        graphs: graphs.len(),
        accuracy: mean(&correct),
        mse: mean(&sq),
        node_precision,
        node_recall,
        edge_precision,
        edge_recall,
        random_precision: mean(&rand_p),
        random_recall: mean(&rand_r),
        selected_noise_fraction: mean(&sel_noise),
        graph_noise_fraction: mean(&graph_noise),
        subgraph_size_pct: size.subgraph_size_pct,
        largest_component_pct: size.largest_component_pct,
        disconnected_parts: mean(&parts).unwrap_or(0.0),
        property_bias: MeanStd::of(&biases).map(|bias| PropertyBias {
            bias,
            empty: per.iter().filter(|p| p.bias.is_some_and(|b| b.1)).count(),
        }),
        empty_selections: per.iter().filter(|p| p.extraction.empty).count(),
    })
}

/// Mean and std of `|Y(G) − property(largest component of G_sub)|` over
/// scalar-labeled graphs.
pub fn property_bias(model: &Model, graphs: &[&Graph], property: PropertyFn<'_>) -> Result<PropertyBias> {
    let per = graphs
        .par_iter()
        .map(|g| {
            let ex = model.extract(g)?;
            bias_of(g, &ex, property)?.ok_or_else(|| Error::Domain("property bias needs scalar labels".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per.iter().map(|b| b.0).collect();
    let bias = MeanStd::of(&values).ok_or_else(|| Error::Domain("property bias over an empty split".into()))?;
    Ok(PropertyBias {
        bias,
        empty: per.iter().filter(|b| b.1).count(),
    })
}

impl MetricsRecord {
    /// Flat metric-name → value map; `±` fields split into `_mean` and `_std`.
    pub fn summary(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert("graphs".into(), self.graphs as f64);
        let mut scalar = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                out.insert(name.to_string(), v);
            }
        };
        scalar("accuracy", self.accuracy);
        scalar("mse", self.mse);
        scalar("random_precision", self.random_precision);
        scalar("random_recall", self.random_recall);
        scalar("selected_noise_fraction", self.selected_noise_fraction);
        scalar("graph_noise_fraction", self.graph_noise_fraction);
        scalar("disconnected_parts", Some(self.disconnected_parts));
        scalar("empty_selections", Some(self.empty_selections as f64));
        let pairs = [
            ("node_precision", self.node_precision),
            ("node_recall", self.node_recall),
            ("edge_precision", self.edge_precision),
            ("edge_recall", self.edge_recall),
            ("subgraph_size_pct", Some(self.subgraph_size_pct)),
            ("largest_component_pct", Some(self.largest_component_pct)),
            ("property_bias", self.property_bias.map(|p| p.bias)),
        ];
        for (name, v) in pairs {
            if let Some(m) = v {
                out.insert(format!("{name}_mean"), m.mean);
                out.insert(format!("{name}_std"), m.std);
            }
        }
        out
    }

    /// Human-readable report, one metric per line.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "graphs: {}", self.graphs);
        let mut line = |name: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(s, "{name}: {v}");
            }
        };
        line("accuracy", self.accuracy.map(|v| format!("{v:.4}")));
        line("mse", self.mse.map(|v| format!("{v:.4}")));
        line("node_precision", self.node_precision.map(|m| m.to_string()));
        line("node_recall", self.node_recall.map(|m| m.to_string()));
        line("edge_precision", self.edge_precision.map(|m| m.to_string()));
        line("edge_recall", self.edge_recall.map(|m| m.to_string()));
        line("random_precision", self.random_precision.map(|v| format!("{v:.4}")));
        line("random_recall", self.random_recall.map(|v| format!("{v:.4}")));
        line("selected_noise_fraction", self.selected_noise_fraction.map(|v| format!("{v:.4}")));
        line("graph_noise_fraction", self.graph_noise_fraction.map(|v| format!("{v:.4}")));
        line("subgraph_size_pct", Some(self.subgraph_size_pct.to_string()));
        line("largest_component_pct", Some(self.largest_component_pct.to_string()));
        line("disconnected_parts", Some(format!("{:.4}", self.disconnected_parts)));
        line("property_bias", self.property_bias.map(|p| format!("{} ({} empty)", p.bias, p.empty)));
        line("empty_selections", Some(self.empty_selections.to_string()));
        s
    }
}
