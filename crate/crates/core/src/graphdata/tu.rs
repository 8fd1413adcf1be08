//! Plain-text TU dataset format.
//!
//! A dataset `NAME` is a directory holding
//!
//! * `NAME_A.txt`: one `i, j` line per directed edge, 1-based global node ids;
//! * `NAME_graph_indicator.txt`: the 1-based graph id of every node;
//! * `NAME_graph_labels.txt`: one integer class per graph, or
//!   `NAME_graph_attributes.txt`: one real target per graph (regression);
//! * `NAME_node_labels.txt` (optional): one integer per node, one-hot encoded;
//! * `NAME_truth_mask.txt` (optional): header `node` or `edge`, then one 0/1
//!   per node, or per canonical edge of each graph in graph order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::dataset::{Dataset, DatasetMeta, Splits, Task};
use super::graph::{Graph, Label, TruthMask};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn file_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned())
}

/// Non-blank lines paired with their 1-based line number.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_num<T: std::str::FromStr>(s: &str, file: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Format {
        file: file.to_string(),
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

fn format_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let a_path = file_path(dir, name, "A");
    let ind_path = file_path(dir, name, "graph_indicator");
    let lab_path = file_path(dir, name, "graph_labels");
    let attr_path = file_path(dir, name, "graph_attributes");
    let nl_path = file_path(dir, name, "node_labels");
    let truth_path = file_path(dir, name, "truth_mask");

    // node -> graph
    let ind_file = display_name(&ind_path);
    let mut graph_of: Vec<usize> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (line, text) in lines(&read(&ind_path)?) {
        let id: usize = parse_num(text, &ind_file, line)?;
        let expected_same = sizes.len();
        if id == expected_same && id > 0 {
            *sizes.last_mut().expect("nonempty") += 1;
        } else if id == expected_same + 1 {
            sizes.push(1);
        } else {
            return Err(format_err(
                &ind_file,
                line,
                format!("graph id {id} is not contiguous (previous id {expected_same})"),
            ));
        }
        graph_of.push(id - 1);
    }
    let n_nodes = graph_of.len();
    let n_graphs = sizes.len();
    if n_graphs == 0 {
        return Err(format_err(&ind_file, 1, "no nodes"));
    }
    let mut offsets = vec![0usize; n_graphs];
    for g in 1..n_graphs {
        offsets[g] = offsets[g - 1] + sizes[g - 1];
    }

    // graph targets
    let (task, labels, class_values) = if let Some(text) = read_optional(&attr_path)? {
        let file = display_name(&attr_path);
        let values = lines(&text)
            .map(|(line, t)| parse_num::<f64>(t, &file, line))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n_graphs {
            return Err(format_err(&file, values.len(), format!("expected {n_graphs} targets, found {}", values.len())));
        }
        (Task::Regression, values.into_iter().map(Label::Scalar).collect::<Vec<_>>(), vec![])
    } else {
        let file = display_name(&lab_path);
        let raw = lines(&read(&lab_path)?)
            .map(|(line, t)| parse_num::<i64>(t, &file, line))
            .collect::<Result<Vec<_>>>()?;
        if raw.len() != n_graphs {
            return Err(format_err(&file, raw.len(), format!("expected {n_graphs} labels, found {}", raw.len())));
        }
        let values: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let labels = raw
            .iter()
            .map(|v| Label::Class(values.binary_search(v).expect("present")))
            .collect();
        (Task::Classification { num_classes: values.len() }, labels, values)
    };

    // node features
    let (features, node_label_values) = if let Some(text) = read_optional(&nl_path)? {
        let file = display_name(&nl_path);
        let raw = lines(&text)
            .map(|(line, t)| parse_num::<i64>(t, &file, line))
            .collect::<Result<Vec<_>>>()?;
        if raw.len() != n_nodes {
            return Err(format_err(&file, raw.len(), format!("expected {n_nodes} node labels, found {}", raw.len())));
        }
        let values: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let cols: Vec<usize> = raw.iter().map(|v| values.binary_search(v).expect("present")).collect();
        (Some(cols), values)
    } else {
        (None, vec![])
    };
    let feature_dim = if features.is_some() { node_label_values.len() } else { 1 };

    // edges
    let a_file = display_name(&a_path);
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    for (line, text) in lines(&read(&a_path)?) {
        let mut parts = text.split(',');
        let (Some(i), Some(j), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format_err(&a_file, line, format!("expected `i, j`, found {text:?}")));
        };
        let i: usize = parse_num(i, &a_file, line)?;
        let j: usize = parse_num(j, &a_file, line)?;
        for v in [i, j] {
            if v == 0 || v > n_nodes {
                return Err(format_err(&a_file, line, format!("node index {v} out of range 1..={n_nodes}")));
            }
        }
        let (gi, gj) = (graph_of[i - 1], graph_of[j - 1]);
        if gi != gj {
            return Err(format_err(&a_file, line, format!("edge joins graphs {} and {}", gi + 1, gj + 1)));
        }
        if i == j {
            log::warn!("{a_file}:{line}: ignoring self-loop on node {i}");
            continue;
        }
        edges[gi].push((i - 1 - offsets[gi], j - 1 - offsets[gi]));
    }

    let mut graphs = Vec::with_capacity(n_graphs);
    for g in 0..n_graphs {
        let n = sizes[g];
        let feats = match &features {
            Some(cols) => Matrix::from_fn(n, feature_dim, |r, c| {
                if cols[offsets[g] + r] == c {
                    1.0
                } else {
                    0.0
                }
            }),
            None => Matrix::ones(n, 1),
        };
        graphs.push(Graph::from_edges(n, &edges[g], feats)?.with_label(labels[g]));
    }

    if let Some(text) = read_optional(&truth_path)? {
        attach_truth(&mut graphs, &text, &display_name(&truth_path))?;
    }

    let ds = Dataset {
        graphs,
        splits: Splits::default(),
        meta: DatasetMeta {
            name: name.to_string(),
            feature_dim,
            task,
            class_values,
            node_label_values,
        },
    };
    ds.validate()?;
    Ok(ds)
}

fn attach_truth(graphs: &mut [Graph], text: &str, file: &str) -> Result<()> {
    let mut it = lines(text);
    let (_, header) = it.next().ok_or_else(|| format_err(file, 1, "missing header"))?;
    let per_edge = match header {
        "node" => false,
        "edge" => true,
        other => return Err(format_err(file, 1, format!("header must be `node` or `edge`, found {other:?}"))),
    };
    let mut flags = Vec::new();
    for (line, t) in it {
        flags.push(match t {
            "0" => false,
            "1" => true,
            _ => return Err(format_err(file, line, format!("expected 0 or 1, found {t:?}"))),
        });
    }
    let expected: usize = graphs
        .iter()
        .map(|g| if per_edge { g.edge_count() } else { g.n() })
        .sum();
    if flags.len() != expected {
        return Err(format_err(file, flags.len() + 1, format!("expected {expected} flags, found {}", flags.len())));
    }
    let mut pos = 0;
    for g in graphs.iter_mut() {
        let count = if per_edge { g.edge_count() } else { g.n() };
        let slice = flags[pos..pos + count].to_vec();
        pos += count;
        g.truth = Some(if per_edge {
            TruthMask::Edges(slice)
        } else {
            TruthMask::Nodes(slice)
        });
    }
    Ok(())
}

/// Writes `ds` in TU format. Edges are written in both directions, ordered by
/// source then target; node labels are recovered from one-hot features.
pub fn write_tu_dataset(ds: &Dataset, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut a = String::new();
    let mut ind = String::new();
    let mut nl = String::new();
    let mut targets = String::new();
    let mut truth = String::new();
    let truth_kind = ds.graphs.first().and_then(|g| g.truth.as_ref()).map(|t| match t {
        TruthMask::Nodes(_) => "node",
        TruthMask::Edges(_) => "edge",
    });
    if let Some(kind) = truth_kind {
        truth.push_str(kind);
        truth.push('\n');
    }
    let write_node_labels = !ds.meta.node_label_values.is_empty();
    let mut offset = 0;
    for (gi, g) in ds.graphs.iter().enumerate() {
        for u in 0..g.n() {
            for v in g.neighbors(u) {
                let _ = writeln!(a, "{}, {}", offset + u + 1, offset + v + 1);
            }
            let _ = writeln!(ind, "{}", gi + 1);
            if write_node_labels {
                let row = g.features().row(u);
                let col = row.iter().position(|x| *x == 1.0).filter(|_| row.iter().sum::<f64>() == 1.0);
                let Some(col) = col.filter(|c| *c < ds.meta.node_label_values.len()) else {
                    return Err(Error::Domain(format!("graph {gi} node {u} features are not one-hot")));
                };
                let _ = writeln!(nl, "{}", ds.meta.node_label_values[col]);
            } else if g.features().row(u) != [1.0] {
                return Err(Error::Domain(format!(
                    "graph {gi} node {u} has features that TU node labels cannot express"
                )));
            }
        }
        match (g.label, &ds.meta.task) {
            (Some(Label::Class(c)), Task::Classification { .. }) => {
                let value = ds.meta.class_values.get(c).copied().unwrap_or(c as i64);
                let _ = writeln!(targets, "{value}");
            }
            (Some(Label::Scalar(y)), Task::Regression) => {
                let _ = writeln!(targets, "{y}");
            }
            (label, task) => return Err(Error::Domain(format!("graph {gi}: label {label:?} does not fit {task:?}"))),
        }
        if truth_kind.is_some() {
            let flags: &[bool] = match (&g.truth, truth_kind) {
                (Some(TruthMask::Nodes(m)), Some("node")) | (Some(TruthMask::Edges(m)), Some("edge")) => m,
                _ => return Err(Error::Domain(format!("graph {gi} truth mask is missing or of another kind"))),
            };
            for f in flags {
                truth.push_str(if *f { "1\n" } else { "0\n" });
            }
        }
        offset += g.n();
    }
    let put = |suffix: &str, body: &str| -> Result<()> {
        let p = file_path(dir, name, suffix);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    put("A", &a)?;
    put("graph_indicator", &ind)?;
    match ds.meta.task {
        Task::Classification { .. } => put("graph_labels", &targets)?,
        Task::Regression => put("graph_attributes", &targets)?,
    }
    if write_node_labels {
        put("node_labels", &nl)?;
    }
    if truth_kind.is_some() {
        put("truth_mask", &truth)?;
    }
    Ok(())
}
