use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sib::cli::manifest::RunManifest;
use sib::graphdata::parse_tu_dataset;
use sib::sib::Model;

fn sib(args: &[&str]) -> Output {
    sib_env(args, None)
}

fn sib_env(args: &[&str], data_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sib"));
    cmd.args(args).env_remove("SIB_DATA_ROOT").env("RUST_LOG", "warn");
    if let Some(root) = data_root {
        cmd.env("SIB_DATA_ROOT", root);
    }
    cmd.output().expect("run sib")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn planted(root: &Path, name: &str, count: usize, seed: u64) -> PathBuf {
    let dir = root.join(name);
    ok(&sib(&[
        "generate", "planted", "--out", p(&dir), "--count", &count.to_string(), "--seed", &seed.to_string(),
    ]));
    dir
}

fn train_small(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", p(data), "--out", p(out), "--outer-steps", "5", "--inner-steps", "3"];
    args.extend_from_slice(extra);
    sib(&args)
}

#[test]
fn generate_is_deterministic_and_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let a = planted(tmp.path(), "A", 20, 5);
    let b = tmp.path().join("B");
    ok(&sib(&["generate", "planted", "--out", p(&b), "--name", "A", "--count", "20", "--seed", "5"]));
    assert_eq!(dir_contents(&a), dir_contents(&b));
    for f in ["A_A.txt", "A_graph_indicator.txt", "A_graph_labels.txt", "A_node_labels.txt", "A_truth_mask.txt", "manifest.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }

    let again = sib(&["generate", "planted", "--out", p(&a), "--count", "20", "--seed", "6"]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
    ok(&sib(&["generate", "planted", "--out", p(&a), "--count", "20", "--seed", "6", "--force"]));
    assert_ne!(dir_contents(&a), dir_contents(&b));
}

#[test]
fn noisy_edges_marks_original_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let src = planted(tmp.path(), "SRC", 6, 1);
    let noisy = tmp.path().join("NOISY");
    ok(&sib(&["generate", "noisy-edges", "--input", p(&src), "--out", p(&noisy), "--fraction", "0.3", "--seed", "2"]));
    let before = parse_tu_dataset(&src, "SRC").unwrap();
    let after = parse_tu_dataset(&noisy, "NOISY").unwrap();
    for (g, h) in before.graphs.iter().zip(&after.graphs) {
        let e = g.edge_count();
        assert_eq!(h.edge_count(), e + (0.3 * e as f64).ceil() as usize);
        let mask = match &h.truth {
            Some(sib::graphdata::TruthMask::Edges(m)) => m.clone(),
            other => panic!("expected an edge mask, got {other:?}"),
        };
        let kept: Vec<_> = h.edges().into_iter().zip(&mask).filter(|(_, m)| **m).map(|(e, _)| e).collect();
        assert_eq!(kept, g.edges());
    }
}

#[test]
fn train_writes_artifacts_and_eval_reads_them() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 30, 2);
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &[]));

    let manifest = RunManifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!(manifest.status, "completed");
    assert!(manifest.duration_secs.is_some());
    assert_eq!(manifest.config.outer_steps, 5);
    assert_eq!(manifest.dataset.fingerprint.len(), 64);
    let trace = fs::read_to_string(run.join("trace.ndjson")).unwrap();
    assert_eq!(trace.lines().count(), 5);
    for line in trace.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["step", "l_cls", "l_con", "l_mi", "total", "val_acc"] {
            assert!(rec.get(key).is_some(), "{key} missing in {line}");
        }
    }
    let model = Model::load(run.join("checkpoint.json")).unwrap();
    assert_eq!(model.arch.input_dim, parse_tu_dataset(&data, "P").unwrap().meta.feature_dim);

    let out = sib(&["eval", "--run", p(&run)]);
    ok(&out);
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("accuracy:") && report.contains("node_precision:"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("eval_test.json")).unwrap()).unwrap();
    assert!(summary["summary"]["accuracy"].is_number());
    assert!(summary["summary"]["node_recall_mean"].is_number());

    let json = tmp.path().join("all.json");
    ok(&sib(&["eval", "--checkpoint", p(&run.join("checkpoint.json")), "--data", p(&data), "--on", "all", "--summary", p(&json)]));
    let all: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(all["metrics"]["graphs"], 30);
}

#[test]
fn eval_without_masks_omits_precision() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 20, 3);
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &[]));
    fs::remove_file(data.join("P_truth_mask.txt")).unwrap();
    let json = tmp.path().join("s.json");
    ok(&sib(&["eval", "--run", p(&run), "--summary", p(&json)]));
    let text = fs::read_to_string(&json).unwrap();
    assert!(!text.contains("precision") && !text.contains("recall"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 20, 4);
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small run\nouter_steps = 7\ninner_steps = 2\nalpha = 1.5\n").unwrap();
    let run = tmp.path().join("run");
    ok(&sib(&["train", "--data", p(&data), "--out", p(&run), "--config", p(&cfg), "--outer-steps", "3"]));
    let m = RunManifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!((m.config.outer_steps, m.config.inner_steps, m.config.alpha), (3, 2, 1.5));
    assert_eq!(fs::read_to_string(run.join("trace.ndjson")).unwrap().lines().count(), 3);

    fs::write(&cfg, "outer_steps = 2\nlearning_rate = 0.1\n").unwrap();
    let bad = sib(&["train", "--data", p(&data), "--out", p(&run), "--config", p(&cfg)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("learning_rate"));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(sib(&["train", "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(sib(&["train", "--data", p(&tmp.path().join("nope")), "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(sib(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sib(&["--help"]).status.code(), Some(0));
    let data = planted(tmp.path(), "P", 10, 1);
    assert_eq!(train_small(&data, &out, &["--eta1", "-1"]).status.code(), Some(1));
    assert_eq!(train_small(&data, &out, &["--mode", "pooling"]).status.code(), Some(1));
}

#[test]
fn divergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 10, 1);
    let run = tmp.path().join("run");
    let out = train_small(&data, &run, &["--eta2", "1e300", "--eta1", "1e300"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let m = RunManifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!(m.status, "failed");
    assert!(m.error.unwrap().contains("diverged"));
}

#[test]
fn data_root_resolves_relative_names() {
    let tmp = tempfile::tempdir().unwrap();
    planted(tmp.path(), "ROOTED", 10, 1);
    let run = tmp.path().join("run");
    let out = sib_env(
        &["train", "--data", "ROOTED", "--out", p(&run), "--outer-steps", "2", "--inner-steps", "1"],
        Some(tmp.path()),
    );
    ok(&out);
    let m = RunManifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!(m.dataset.name, "ROOTED");
}

#[test]
fn eval_rejects_mismatched_feature_width() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 20, 2);
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &[]));
    // without noise nodes only the cycle and clique degrees occur
    let narrow = tmp.path().join("NARROW");
    ok(&sib(&["generate", "planted", "--out", p(&narrow), "--count", "20", "--noise", "0"]));
    let out = sib(&["eval", "--checkpoint", p(&run.join("checkpoint.json")), "--data", p(&narrow), "--on", "all"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("features"));
}

#[test]
fn line_graph_runs_report_edge_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let src = planted(tmp.path(), "SRC", 20, 1);
    let noisy = tmp.path().join("NOISY");
    ok(&sib(&["generate", "noisy-edges", "--input", p(&src), "--out", p(&noisy)]));
    let run = tmp.path().join("run");
    ok(&train_small(&noisy, &run, &["--line-graph"]));
    let json = tmp.path().join("s.json");
    ok(&sib(&["eval", "--run", p(&run), "--summary", p(&json)]));
    let text = fs::read_to_string(&json).unwrap();
    assert!(text.contains("edge_precision") && !text.contains("node_precision"));
}

#[test]
fn regression_runs_report_property_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("REG");
    ok(&sib(&["generate", "planted-regression", "--out", p(&data), "--count", "20", "--seed", "1"]));
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &[]));
    let json = tmp.path().join("s.json");
    ok(&sib(&["eval", "--run", p(&run), "--summary", p(&json)]));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(s["summary"]["mse"].is_number() && s["summary"]["property_bias_mean"].is_number());
    assert!(s["summary"].get("accuracy").is_none());
}

#[test]
fn kfold_runs_record_the_fold() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 20, 2);
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &["--kfold", "5", "--fold", "2"]));
    let m = RunManifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!(m.dataset.split, sib::cli::manifest::SplitSpec::Kfold { k: 5, fold: 2, seed: 0 });
    assert_eq!(train_small(&data, &run, &["--kfold", "5", "--fold", "5"]).status.code(), Some(1));
}

/// Minimal reader for the exported DOT subset: node member flags and edges.
fn parse_dot(text: &str) -> (Vec<bool>, Vec<(usize, usize)>) {
    let mut members = Vec::new();
    let mut edges = Vec::new();
    for line in text.lines().map(str::trim) {
        if let Some((u, v)) = line.trim_end_matches(';').split_once(" -- ") {
            edges.push((u.parse().unwrap(), v.parse().unwrap()));
        } else if let Some((id, attrs)) = line.split_once(" [") {
            if let Ok(id) = id.parse::<usize>() {
                assert_eq!(id, members.len());
                members.push(attrs.contains("member=1"));
            }
        }
    }
    (members, edges)
}

#[test]
fn export_round_trips_structure_and_membership() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 20, 6);
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &[]));
    let ds = parse_tu_dataset(&data, "P").unwrap();
    let model = Model::load(run.join("checkpoint.json")).unwrap();
    for index in [0usize, 7, 19] {
        let dot = tmp.path().join(format!("g{index}.dot"));
        ok(&sib(&["export", "--run", p(&run), "--index", &index.to_string(), "--out", p(&dot)]));
        let (members, edges) = parse_dot(&fs::read_to_string(&dot).unwrap());
        let g = &ds.graphs[index];
        assert_eq!(members.len(), g.n());
        let mut adj = sib::numerics::Matrix::zeros(g.n(), g.n());
        for (u, v) in edges {
            adj.set(u, v, 1.0);
            adj.set(v, u, 1.0);
        }
        assert_eq!(&adj, g.adjacency());
        let flags: Vec<bool> = fs::read_to_string(dot.with_extension("members.txt"))
            .unwrap()
            .lines()
            .map(|l| l == "1")
            .collect();
        assert_eq!(flags, members);
        let selected: Vec<usize> = (0..g.n()).filter(|&i| members[i]).collect();
        assert_eq!(selected, model.extract(g).unwrap().selected);
    }
    let out = sib(&["export", "--run", p(&run), "--index", "20", "--out", p(&tmp.path().join("x.dot"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("out of range"));
}

#[test]
fn replay_rejects_a_changed_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = planted(tmp.path(), "P", 20, 2);
    let run = tmp.path().join("run");
    ok(&train_small(&data, &run, &[]));
    fs::write(data.join("P_graph_labels.txt"), "1\n".repeat(20)).unwrap();
    let out = sib(&["train", "--from-manifest", p(&run.join("manifest.json")), "--out", p(&tmp.path().join("again"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("fingerprint"));
}
