//! Command-line front end: `generate`, `train`, `eval` and `export`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data, format or
//! numeric error, 3 training divergence.

pub mod dot;
pub mod manifest;

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, MetricsRecord, TruthKind};
use crate::graphdata::{
    clique_number, generate_noisy_edges, generate_planted_motif, generate_planted_regression, parse_tu_dataset,
    write_tu_dataset, Dataset, Graph, Task,
};
use crate::sib::{train_with, Model, TrainConfig};
use manifest::{fingerprint, load_dataset, Artifacts, DatasetSpec, RunManifest, SplitSpec};

/// Environment variable naming the directory that relative dataset paths
/// fall back to when they do not exist under the working directory.
pub const DATA_ROOT_ENV: &str = "SIB_DATA_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sib", version, about = "Subgraph information bottleneck: train, evaluate and export graph explanations")]
pub struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic or corrupted dataset in TU format.
    Generate {
        #[command(subcommand)]
        kind: Generate,
    },
    /// Train a model and write checkpoint, loss trace and run manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Export one graph with its extracted subgraph as DOT plus a membership file.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset name used as file prefix (default: output directory name).
    #[arg(long)]
    pub name: Option<String>,
    /// Overwrite the dataset files of a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
pub enum Generate {
    /// Cycle-vs-clique classification graphs with a planted motif and node truth masks.
    Planted {
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        motif: usize,
        #[arg(long, default_value_t = 10)]
        noise: usize,
        #[arg(long, default_value_t = 0.2)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Planted cliques of random size; the target is the clique number.
    PlantedRegression {
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        motif_min: usize,
        #[arg(long, default_value_t = 6)]
        motif_max: usize,
        #[arg(long, default_value_t = 10)]
        noise: usize,
        #[arg(long, default_value_t = 0.2)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Adds redundant edges to every graph of a dataset and marks the original edges.
    NoisyEdges {
        #[command(flatten)]
        output: OutputArgs,
        /// Source dataset directory.
        #[arg(long)]
        input: PathBuf,
        /// Source dataset name (default: input directory name).
        #[arg(long)]
        input_name: Option<String>,
        /// Redundant edges per graph as a fraction of its edge count.
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Dataset location and split.
#[derive(Args, Debug, Default)]
pub struct DataArgs {
    /// Dataset directory in TU format.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset name used as file prefix (default: directory name).
    #[arg(long)]
    pub name: Option<String>,
    /// Work on line graphs, so nodes stand for the original edges.
    #[arg(long)]
    pub line_graph: bool,
    /// Train,val,test fractions.
    #[arg(long, value_name = "TRAIN,VAL,TEST")]
    pub split: Option<String>,
    /// Seed of the split (and of the fold assignment).
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Use stratified k-fold splits instead of fractions.
    #[arg(long)]
    pub kfold: Option<usize>,
    /// Fold to use with --kfold.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
}

/// Hyperparameter flags; each overrides the config file.
#[derive(Args, Debug, Default)]
pub struct HyperArgs {
    /// sib, att or gcn.
    #[arg(long)]
    pub mode: Option<String>,
    /// Kept fraction of nodes for the attention baseline.
    #[arg(long)]
    pub ratio: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub inner_steps: Option<String>,
    #[arg(long)]
    pub outer_steps: Option<String>,
    #[arg(long)]
    pub eta1: Option<String>,
    #[arg(long)]
    pub eta2: Option<String>,
    /// softmax or gumbel.
    #[arg(long)]
    pub relaxation: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub drop_edge: Option<String>,
    /// Membership threshold on the first assignment column, or `argmax`.
    #[arg(long)]
    pub threshold: Option<String>,
    /// Any config key, as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl HyperArgs {
    fn apply(&self, cfg: &mut TrainConfig) -> Result<()> {
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        let flags = [
            ("mode", &self.mode),
            ("att_ratio", &self.ratio),
            ("seed", &self.seed),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("inner_steps", &self.inner_steps),
            ("outer_steps", &self.outer_steps),
            ("eta1", &self.eta1),
            ("eta2", &self.eta2),
            ("relaxation", &self.relaxation),
            ("tau", &self.tau),
            ("hidden", &self.hidden),
            ("layers", &self.layers),
            ("batch_size", &self.batch_size),
            ("drop_edge", &self.drop_edge),
            ("threshold", &self.threshold),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for checkpoint.json, trace.ndjson and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Config file of key=value lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rerun the configuration and dataset recorded in a run manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Checkpoint file.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training output directory; supplies checkpoint, dataset and split.
    #[arg(long)]
    pub run: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// train, val, test or all.
    #[arg(long = "on", default_value = "test")]
    pub on: String,
    /// JSON summary path (default: eval_<split>.json next to the checkpoint).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Graph index within the dataset (0-based).
    #[arg(long)]
    pub index: usize,
    /// DOT output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Membership vector file (default: the DOT path with extension members.txt).
    #[arg(long)]
    pub members: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

/// Entry point of the `sib` binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match cli.command {
        Command::Generate { kind } => cmd_generate(kind),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Finds a dataset directory: as given, else under `$SIB_DATA_ROOT`.
pub fn resolve_data(path: &Path) -> Result<PathBuf> {
    if path.is_dir() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV) {
            let candidate = Path::new(&root).join(path);
            if candidate.is_dir() {
                return Ok(candidate);
            }
        }
    }
    Err(Error::Config(format!("dataset directory {} not found", path.display())))
}

fn dir_name(path: &Path) -> Result<String> {
    let abs = absolute(path)?;
    abs.file_name()
        .and_then(|f| f.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Config(format!("cannot derive a dataset name from {}; pass --name", path.display())))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

/// Parses a config file of `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path, cfg: &mut TrainConfig) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::Config(format!("{}:{}: {msg}", path.display(), i + 1));
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected key=value, got {line:?}")))?;
        cfg.set(k.trim(), v).map_err(|e| match e {
            Error::Config(msg) => at(msg),
            other => other,
        })?;
    }
    Ok(())
}

fn prepare_output(out: &Path, name: &str, force: bool) -> Result<()> {
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            if !force {
                return Err(Error::Config(format!(
                    "output directory {} is not empty; pass --force to overwrite",
                    out.display()
                )));
            }
            for f in manifest::dataset_files(out, name)? {
                fs::remove_file(&f).map_err(|e| Error::io(&f, e))?;
            }
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

#[derive(Serialize)]
struct GenerateManifest<'a> {
    format: &'static str,
    version: u32,
    generator: &'static str,
    name: &'a str,
    params: serde_json::Value,
    graphs: usize,
    fingerprint: String,
}

fn cmd_generate(kind: Generate) -> Result<()> {
    let (output, generator, params, ds) = match kind {
        Generate::Planted { output, count, motif, noise, edge_prob, seed } => {
            let ds = generate_planted_motif(count, motif, noise, edge_prob, seed)?;
            let params = serde_json::json!({
                "count": count, "motif": motif, "noise": noise, "edge_prob": edge_prob, "seed": seed,
            });
            (output, "planted", params, ds)
        }
        Generate::PlantedRegression { output, count, motif_min, motif_max, noise, edge_prob, seed } => {
            if motif_min > motif_max {
                return Err(Error::Config(format!("motif-min {motif_min} exceeds motif-max {motif_max}")));
            }
            let ds = generate_planted_regression(count, motif_min..=motif_max, noise, edge_prob, seed)?;
            let params = serde_json::json!({
                "count": count, "motif_min": motif_min, "motif_max": motif_max,
                "noise": noise, "edge_prob": edge_prob, "seed": seed,
            });
            (output, "planted-regression", params, ds)
        }
        Generate::NoisyEdges { output, input, input_name, fraction, seed } => {
            let input = resolve_data(&input)?;
            let input_name = match input_name {
                Some(n) => n,
                None => dir_name(&input)?,
            };
            let source = parse_tu_dataset(&input, &input_name)?;
            let ds = generate_noisy_edges(&source, fraction, seed)?;
            let params = serde_json::json!({
                "input": absolute(&input)?, "input_name": input_name,
                "input_fingerprint": fingerprint(&input, &input_name)?,
                "fraction": fraction, "seed": seed,
            });
            (output, "noisy-edges", params, ds)
        }
    };
    let name = match output.name {
        Some(n) => n,
        None => dir_name(&output.out)?,
    };
    prepare_output(&output.out, &name, output.force)?;
    write_tu_dataset(&ds, &output.out, &name)?;
    let record = GenerateManifest {
        format: "sib-generate-manifest",
        version: 1,
        generator,
        name: &name,
        params,
        graphs: ds.len(),
        fingerprint: fingerprint(&output.out, &name)?,
    };
    let path = output.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Domain(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    println!("wrote {} graphs to {} ({name})", ds.len(), output.out.display());
    Ok(())
}

fn parse_fractions(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--split expects three numbers, got {text:?}")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Config(format!("--split expects three numbers, got {text:?}"))),
    }
}

impl DataArgs {
    fn has_split_flags(&self) -> bool {
        self.split.is_some() || self.split_seed.is_some() || self.kfold.is_some()
    }

    fn split_spec(&self, fallback: Option<&SplitSpec>) -> Result<SplitSpec> {
        if !self.has_split_flags() {
            if let Some(s) = fallback {
                return Ok(s.clone());
            }
        }
        let seed = self.split_seed.unwrap_or(0);
        if let Some(k) = self.kfold {
            if self.split.is_some() {
                return Err(Error::Config("--split and --kfold are mutually exclusive".into()));
            }
            if self.fold >= k {
                return Err(Error::Config(format!("--fold {} out of range for {k} folds", self.fold)));
            }
            return Ok(SplitSpec::Kfold { k, fold: self.fold, seed });
        }
        let (train, val, test) = parse_fractions(self.split.as_deref().unwrap_or("0.8,0.1,0.1"))?;
        Ok(SplitSpec::Fractions { train, val, test, seed })
    }

    /// Builds the dataset spec, filling unset fields from `fallback`.
    fn spec(&self, fallback: Option<&DatasetSpec>) -> Result<DatasetSpec> {
        let (path, name) = match (&self.data, fallback) {
            (Some(p), _) => {
                let path = absolute(&resolve_data(p)?)?;
                let name = match &self.name {
                    Some(n) => n.clone(),
                    None => dir_name(&path)?,
                };
                (path, name)
            }
            (None, Some(f)) => (f.path.clone(), self.name.clone().unwrap_or_else(|| f.name.clone())),
            (None, None) => return Err(Error::Config("missing dataset path: pass --data".into())),
        };
        if !path.is_dir() {
            return Err(Error::Config(format!("dataset directory {} not found", path.display())));
        }
        Ok(DatasetSpec {
            fingerprint: fingerprint(&path, &name)?,
            line_graph: self.line_graph || fallback.is_some_and(|f| f.line_graph),
            split: self.split_spec(fallback.map(|f| &f.split))?,
            path,
            name,
        })
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let replay = a.from_manifest.as_deref().map(RunManifest::load).transpose()?;
    let mut cfg = replay.as_ref().map(|m| m.config.clone()).unwrap_or_default();
    if let Some(path) = &a.config {
        read_config_file(path, &mut cfg)?;
    }
    a.hyper.apply(&mut cfg)?;
    cfg.validate()?;
    let dataset = a.data.spec(replay.as_ref().map(|m| &m.dataset))?;
    if let Some(m) = &replay {
        if a.data.data.is_none() {
            m.dataset.verify()?;
        }
    }

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let out = absolute(&a.out)?;
    let mut manifest = RunManifest {
        format: manifest::FORMAT.into(),
        version: manifest::VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        dataset,
        artifacts: Artifacts {
            checkpoint: out.join("checkpoint.json"),
            trace: out.join("trace.ndjson"),
            manifest: out.join("manifest.json"),
        },
        status: "running".into(),
        error: None,
        selected_step: None,
        duration_secs: None,
    };
    manifest.save(&manifest.artifacts.manifest)?;

    let start = Instant::now();
    let result = run_training(&manifest);
    manifest.duration_secs = Some(start.elapsed().as_secs_f64());
    match result {
        Ok(selected) => {
            manifest.status = "completed".into();
            manifest.selected_step = selected;
            manifest.save(&manifest.artifacts.manifest)?;
            println!(
                "trained {} steps in {:.1}s; checkpoint {}",
                cfg.outer_steps,
                manifest.duration_secs.unwrap_or_default(),
                manifest.artifacts.checkpoint.display()
            );
            Ok(())
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            manifest.save(&manifest.artifacts.manifest)?;
            Err(e)
        }
    }
}

fn run_training(m: &RunManifest) -> Result<Option<usize>> {
    let ds = m.dataset.load()?;
    let trace_path = &m.artifacts.trace;
    let file = fs::File::create(trace_path).map_err(|e| Error::io(trace_path, e))?;
    let mut trace = BufWriter::new(file);
    let mut write_err = None;
    let outcome = train_with(&ds, &m.config, |rec| {
        if write_err.is_some() {
            return;
        }
        let line = serde_json::to_string(rec).expect("records serialize");
        if let Err(e) = writeln!(trace, "{line}") {
            write_err = Some(e);
        }
        if rec.step % 10 == 0 {
            log::info!(
                "step {} total {:.4} cls {:.4} con {:.4} mi {:.4} val {:?}",
                rec.step,
                rec.total,
                rec.l_cls,
                rec.l_con,
                rec.l_mi,
                rec.val_acc
            );
        }
    });
    let flushed = trace.flush();
    if let Some(e) = write_err {
        return Err(Error::io(trace_path, e));
    }
    flushed.map_err(|e| Error::io(trace_path, e))?;
    let outcome = outcome?;
    outcome.model.save(&m.artifacts.checkpoint)?;
    Ok(outcome.selected_step)
}

/// Model, dataset and checkpoint path for `eval` and `export`.
fn load_model_and_data(model: &ModelArgs, data: &DataArgs) -> Result<(Model, Dataset, DatasetSpec, PathBuf)> {
    let run = model
        .run
        .as_ref()
        .map(|dir| RunManifest::load(&dir.join("manifest.json")))
        .transpose()?;
    let checkpoint = match (&model.checkpoint, &run) {
        (Some(c), _) => c.clone(),
        (None, Some(m)) => m.artifacts.checkpoint.clone(),
        (None, None) => return Err(Error::Config("pass --checkpoint or --run".into())),
    };
    let spec = data.spec(run.as_ref().map(|m| &m.dataset))?;
    let model = Model::load(&checkpoint)?;
    let ds = load_dataset(&spec.path, &spec.name, spec.line_graph, &spec.split)?;
    if ds.meta.feature_dim != model.arch.input_dim {
        return Err(Error::Domain(format!(
            "checkpoint expects {} node features but dataset {} has {}",
            model.arch.input_dim, spec.name, ds.meta.feature_dim
        )));
    }
    if ds.meta.task.output_dim() != model.arch.task.output_dim() {
        return Err(Error::Domain(format!(
            "checkpoint task {:?} does not match dataset task {:?}",
            model.arch.task, ds.meta.task
        )));
    }
    Ok((model, ds, spec, checkpoint))
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    checkpoint: &'a Path,
    dataset: &'a str,
    split: &'a str,
    metrics: &'a MetricsRecord,
    summary: std::collections::BTreeMap<String, f64>,
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let (model, ds, spec, checkpoint) = load_model_and_data(&a.model, &a.data)?;
    let idx: Vec<usize> = match a.on.as_str() {
        "train" => ds.splits.train.clone(),
        "val" => ds.splits.val.clone(),
        "test" => ds.splits.test.clone(),
        "all" => (0..ds.len()).collect(),
        other => return Err(Error::Config(format!("--on must be train, val, test or all, got {other:?}"))),
    };
    if idx.is_empty() {
        return Err(Error::Config(format!("split {} is empty", a.on)));
    }
    let graphs: Vec<&Graph> = ds.subset(&idx);
    let clique = |g: &Graph| clique_number(g) as f64;
    let opts = EvalOptions {
        truth: if spec.line_graph { TruthKind::Edges } else { TruthKind::Nodes },
        property: matches!(ds.meta.task, Task::Regression).then_some(&clique as _),
    };
    let metrics = evaluate(&model, &graphs, &opts)?;
    print!("{}", metrics.report());
    let summary_path = a.summary.unwrap_or_else(|| {
        checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("eval_{}.json", a.on))
    });
    let record = EvalSummary {
        checkpoint: &checkpoint,
        dataset: &ds.meta.name,
        split: &a.on,
        metrics: &metrics,
        summary: metrics.summary(),
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Domain(e.to_string()))?;
    fs::write(&summary_path, text + "\n").map_err(|e| Error::io(&summary_path, e))?;
    log::info!("summary written to {}", summary_path.display());
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let (model, ds, _, _) = load_model_and_data(&a.model, &a.data)?;
    let g = ds.graphs.get(a.index).ok_or_else(|| {
        Error::Config(format!("graph index {} out of range for {} graphs", a.index, ds.len()))
    })?;
    let extraction = model.extract(g)?;
    if extraction.empty {
        log::warn!("graph {}: the extracted subgraph is empty", a.index);
    }
    let members = a.members.unwrap_or_else(|| a.out.with_extension("members.txt"));
    fs::write(&a.out, dot::to_dot(g, &extraction.selected)).map_err(|e| Error::io(&a.out, e))?;
    fs::write(&members, dot::membership_vector(g.n(), &extraction.selected)).map_err(|e| Error::io(&members, e))?;
    println!(
        "graph {}: {} of {} nodes selected; wrote {} and {}",
        a.index,
        extraction.selected.len(),
        g.n(),
        a.out.display(),
        members.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(
            exit_code(&Error::Divergence { step: 1, component: "l_mi", value: f64::NAN }),
            EXIT_DIVERGED
        );
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_DATA);
    }

    #[test]
    fn config_file_and_flags() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.cfg");
        fs::write(&path, "# run\nalpha = 2\nbeta=0.5  # weight\n\nmode = att\n").unwrap();
        let mut cfg = TrainConfig::default();
        read_config_file(&path, &mut cfg).unwrap();
        assert_eq!((cfg.alpha, cfg.beta, cfg.mode), (2.0, 0.5, crate::sib::Mode::Att));
        let flags = HyperArgs {
            alpha: Some("3".into()),
            ..HyperArgs::default()
        };
        flags.apply(&mut cfg).unwrap();
        assert_eq!(cfg.alpha, 3.0);

        fs::write(&path, "alpha = 1\nlearning_rate = 2\n").unwrap();
        let err = read_config_file(&path, &mut TrainConfig::default()).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("learning_rate") && m.contains(":2:")));
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(parse_fractions("0.7, 0.1,0.2").unwrap(), (0.7, 0.1, 0.2));
        assert!(parse_fractions("0.7,0.3").is_err());
        assert!(parse_fractions("a,b,c").is_err());
    }
}
