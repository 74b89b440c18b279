//! One function per subcommand. Each reads what it needs from a
//! [`RunConfig`], writes its artifacts under `output_dir`, and returns the
//! in-memory result for callers that want it.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use log::{info, warn};
use nalgebra::DMatrix;
use qagnn::data::{run_pipeline, Manifest, RawDataset};
use qagnn::feature_map::{fidelity_gram, fourier_spectrum_probe, pauli_gram, Backend, EncoderConfig};
use qagnn::graph::{build_graph, hop_operators_with, read_node_table, write_node_table, FlowGraph, GraphStats, HopOperators, NodeTable};
use qagnn::metrics::{confusion, format_table, report, MetricsReport};
use qagnn::model::{encode, forward, predict, ModelParams, ModelVariant};
use qagnn::training::{train, Split, TrainReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::synth::{self, SynthOptions, Synthetic};

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

fn output_path(cfg: &RunConfig, name: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    Ok(cfg.output_dir.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_generate(opts: &SynthOptions, out: &Path) -> anyhow::Result<Synthetic> {
    let data = synth::generate(opts)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    synth::write_csv(&data.dataset, out)?;
    info!("wrote {} flows for {} nodes to {}", data.dataset.rows.len(), opts.nodes, out.display());
    Ok(data)
}

pub fn cmd_preprocess(cfg: &RunConfig) -> anyhow::Result<Manifest> {
    let input = cfg.data.input.as_ref().context("no input CSV configured (data.input or --input)")?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let raw = RawDataset::from_csv(file).with_context(|| format!("reading {}", input.display()))?;
    let out = run_pipeline(&raw, &cfg.data.pipeline)?;
    for (name, part) in SPLITS.iter().zip([&out.train, &out.val, &out.test]) {
        let path = output_path(cfg, &format!("{name}.csv"))?;
        write_node_table(&part.node_ids, &part.features, &part.labels, File::create(&path)?)?;
    }
    write_json(&output_path(cfg, "manifest.json")?, &out.manifest)?;
    let s = out.manifest.split_sizes;
    info!("{} nodes: train {} / val {} / test {}", out.manifest.aggregated_rows, s.train, s.val, s.test);
    Ok(out.manifest)
}

/// One split as a similarity graph plus its hop operators.
pub struct SplitGraph {
    pub graph: FlowGraph,
    pub hops: HopOperators,
}

impl SplitGraph {
    pub fn split(&self) -> Split<'_> {
        Split {
            graph: &self.graph,
            hops: &self.hops,
        }
    }
}

pub fn read_split(cfg: &RunConfig, name: &str) -> anyhow::Result<NodeTable> {
    let path = cfg.splits_dir().join(format!("{name}.csv"));
    let file = File::open(&path).with_context(|| format!("opening split {} (run preprocess first)", path.display()))?;
    read_node_table(file).with_context(|| format!("reading {}", path.display()))
}

fn graph_from_table(table: &NodeTable, cfg: &RunConfig, threshold: f64) -> anyhow::Result<SplitGraph> {
    let options = qagnn::graph::GraphOptions { threshold, ..cfg.graph };
    let graph = build_graph(table.features.clone(), table.labels.clone(), table.node_ids.clone(), &options)?;
    let hops = hop_operators_with(&graph, &options);
    Ok(SplitGraph { graph, hops })
}

/// Train, validation and test graphs built at one similarity threshold.
pub struct Splits {
    pub train: SplitGraph,
    pub val: SplitGraph,
    pub test: SplitGraph,
}

impl Splits {
    pub fn load(cfg: &RunConfig) -> anyhow::Result<Self> {
        let tables = [read_split(cfg, "train")?, read_split(cfg, "val")?, read_split(cfg, "test")?];
        Self::from_tables(&tables, cfg, cfg.graph.threshold)
    }

    fn from_tables(tables: &[NodeTable; 3], cfg: &RunConfig, threshold: f64) -> anyhow::Result<Self> {
        let f = tables[0].features.ncols();
        for (name, t) in SPLITS.iter().zip(tables) {
            ensure!(!t.node_ids.is_empty(), "split {name} is empty");
            ensure!(t.features.ncols() == f, "split {name} has {} features, train has {f}", t.features.ncols());
        }
        Ok(Self {
            train: graph_from_table(&tables[0], cfg, threshold)?,
            val: graph_from_table(&tables[1], cfg, threshold)?,
            test: graph_from_table(&tables[2], cfg, threshold)?,
        })
    }

    pub fn n_features(&self) -> usize {
        self.train.graph.n_features()
    }

    pub fn get(&self, name: &str) -> anyhow::Result<&SplitGraph> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => bail!("unknown split {other:?} (expected train, val or test)"),
        }
    }

    pub fn stats(&self) -> GraphStatsFile {
        GraphStatsFile {
            train: self.train.graph.stats(),
            val: self.val.graph.stats(),
            test: self.test.graph.stats(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphStatsFile {
    pub train: GraphStats,
    pub val: GraphStats,
    pub test: GraphStats,
}

pub fn init_params(cfg: &RunConfig, variant: ModelVariant, n_features: usize) -> anyhow::Result<ModelParams> {
    let mc = cfg.model.build(n_features, cfg.encoder.n_layers)?;
    let mc = qagnn::model::ModelConfig { variant, ..mc };
    Ok(ModelParams::init(mc, &mut ChaCha8Rng::seed_from_u64(cfg.train.seed)))
}

fn fit(cfg: &RunConfig, splits: &Splits, variant: ModelVariant) -> anyhow::Result<(TrainReport, EncoderConfig)> {
    let encoder = cfg.encoder.build(splits.n_features())?;
    let init = init_params(cfg, variant, splits.n_features())?;
    let report = train(splits.train.split(), splits.val.split(), init, &encoder, &cfg.train)
        .with_context(|| format!("training variant {variant}"))?;
    Ok((report, encoder))
}

pub fn evaluate_graph(params: &ModelParams, split: &SplitGraph, encoder: &EncoderConfig) -> anyhow::Result<MetricsReport> {
    let logits = forward(&split.graph, &split.hops, params, encoder)?;
    Ok(report(&confusion(split.graph.labels(), &predict(&logits))?))
}

fn write_metrics(cfg: &RunConfig, stem: &str, label: &str, metrics: &MetricsReport) -> anyhow::Result<()> {
    write_json(&output_path(cfg, &format!("{stem}.json"))?, metrics)?;
    write_text(&output_path(cfg, &format!("{stem}.txt"))?, &format_table(&[(label.to_string(), metrics)]))
}

pub struct TrainOutcome {
    pub report: TrainReport,
    pub test_metrics: MetricsReport,
}

/// Trains the configured variant and writes `model.json`,
/// `train_report.json`, `loss_curve.csv`, `graph_stats.json` and the test
/// split's `test_metrics.{json,txt}`.
pub fn cmd_train(cfg: &RunConfig) -> anyhow::Result<TrainOutcome> {
    cfg.validate()?;
    let splits = Splits::load(cfg)?;
    write_json(&output_path(cfg, "graph_stats.json")?, &splits.stats())?;
    let (report, encoder) = fit(cfg, &splits, cfg.model.variant)?;
    write_json(&output_path(cfg, "model.json")?, &report.params)?;
    write_json(&output_path(cfg, "train_report.json")?, &report)?;
    report.write_loss_csv(File::create(output_path(cfg, "loss_curve.csv")?)?)?;
    let test_metrics = evaluate_graph(&report.params, &splits.test, &encoder)?;
    write_metrics(cfg, "test_metrics", cfg.model.variant.display_name(), &test_metrics)?;
    info!(
        "best epoch {} of {}; test F1 {:.4}, FPR {:.4}",
        report.best_epoch,
        report.epochs_run(),
        test_metrics.f1,
        test_metrics.fpr
    );
    Ok(TrainOutcome { report, test_metrics })
}

pub fn load_model(path: &Path) -> anyhow::Result<ModelParams> {
    let file = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    let params: ModelParams =
        serde_json::from_reader(std::io::BufReader::new(file)).with_context(|| format!("parsing model {}", path.display()))?;
    params.validate()?;
    Ok(params)
}

/// Scores `model` on one split; writes `metrics_<split>.{json,txt}`.
pub fn cmd_evaluate(cfg: &RunConfig, model: &Path, split: &str) -> anyhow::Result<MetricsReport> {
    let params = load_model(model)?;
    let splits = Splits::load(cfg)?;
    let encoder = cfg.encoder.build(splits.n_features())?;
    let metrics = evaluate_graph(&params, splits.get(split)?, &encoder)?;
    write_metrics(cfg, &format!("metrics_{split}"), params.config.variant.display_name(), &metrics)?;
    Ok(metrics)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub f1: f64,
    pub fpr: f64,
    pub accuracy: f64,
    pub train_edges: usize,
    pub test_edges: usize,
    pub best_epoch: usize,
}

/// Rebuilds the graphs and retrains at each threshold; writes
/// `threshold_sweep.csv`.
pub fn cmd_threshold_sweep(cfg: &RunConfig, thresholds: &[f64]) -> anyhow::Result<Vec<SweepRow>> {
    ensure!(!thresholds.is_empty(), "threshold list is empty");
    cfg.validate()?;
    let tables = [read_split(cfg, "train")?, read_split(cfg, "val")?, read_split(cfg, "test")?];
    let mut rows = Vec::new();
    for &t in thresholds {
        let splits = Splits::from_tables(&tables, cfg, t)?;
        let (report, encoder) = fit(cfg, &splits, cfg.model.variant)?;
        let m = evaluate_graph(&report.params, &splits.test, &encoder)?;
        info!("threshold {t}: F1 {:.4}, FPR {:.4}", m.f1, m.fpr);
        rows.push(SweepRow {
            threshold: t,
            f1: m.f1,
            fpr: m.fpr,
            accuracy: m.accuracy,
            train_edges: splits.train.graph.edge_count(),
            test_edges: splits.test.graph.edge_count(),
            best_epoch: report.best_epoch,
        });
    }
    let mut w = csv::Writer::from_path(output_path(cfg, "threshold_sweep.csv")?)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

fn model_or_init(cfg: &RunConfig, model: Option<&Path>, n_features: usize) -> anyhow::Result<ModelParams> {
    match model {
        Some(path) => load_model(path),
        None => {
            warn!("no model given; using seeded initial parameters");
            init_params(cfg, cfg.model.variant, n_features)
        }
    }
}

/// Node embeddings of every split; writes `embeddings.csv`
/// (`node_id,split,label,z0..`).
pub fn cmd_embed(cfg: &RunConfig, model: Option<&Path>) -> anyhow::Result<Vec<(String, DMatrix<f64>)>> {
    let tables = [read_split(cfg, "train")?, read_split(cfg, "val")?, read_split(cfg, "test")?];
    let f = tables[0].features.ncols();
    let params = model_or_init(cfg, model, f)?;
    let encoder = cfg.encoder.build(f)?;
    let mut w = csv::Writer::from_path(output_path(cfg, "embeddings.csv")?)?;
    let d = params.config.embed_dim();
    let mut header = vec!["node_id".to_string(), "split".into(), "label".into()];
    header.extend((0..d).map(|k| format!("z{k}")));
    w.write_record(&header)?;
    let mut out = Vec::new();
    for (name, t) in SPLITS.iter().zip(&tables) {
        let z = encode(&t.features, &params, &encoder)?;
        for i in 0..z.nrows() {
            let mut rec = vec![t.node_ids[i].clone(), name.to_string(), t.labels[i].to_string()];
            rec.extend(z.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        out.push((name.to_string(), z));
    }
    w.flush()?;
    Ok(out)
}

fn write_matrix(path: &Path, ids: &[String], m: &DMatrix<f64>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["node_id".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub struct Kernels {
    pub node_ids: Vec<String>,
    pub pauli: DMatrix<f64>,
    pub fidelity: Option<DMatrix<f64>>,
}

/// Gram matrices over the first `max_points` training nodes; writes
/// `kernel_pauli.csv` and, on the statevector backend, `kernel_fidelity.csv`.
pub fn cmd_kernel(cfg: &RunConfig, model: Option<&Path>, max_points: usize) -> anyhow::Result<Kernels> {
    ensure!(max_points > 0, "max_points must be at least 1");
    let table = read_split(cfg, "train")?;
    let f = table.features.ncols();
    let params = model_or_init(cfg, model, f)?;
    let theta = params.theta().context("kernels need a quantum encoder (not an mlp_* variant)")?;
    let encoder = cfg.encoder.build(f)?;
    let n = table.node_ids.len().min(max_points);
    let points = table.features.rows(0, n).into_owned();
    let ids = table.node_ids[..n].to_vec();
    let pauli = pauli_gram(&points, theta, &encoder)?;
    write_matrix(&output_path(cfg, "kernel_pauli.csv")?, &ids, &pauli)?;
    let fidelity = if matches!(encoder.backend, Backend::ExactStatevector) {
        let k = fidelity_gram(&points, theta, &encoder)?;
        write_matrix(&output_path(cfg, "kernel_fidelity.csv")?, &ids, &k)?;
        Some(k)
    } else {
        warn!("fidelity kernel needs the statevector backend; skipped");
        None
    };
    Ok(Kernels {
        node_ids: ids,
        pauli,
        fidelity,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub feature: usize,
    pub qubit: usize,
    pub total_energy: f64,
    pub out_of_set_energy: f64,
    pub relative_out_of_set: f64,
}

/// Fourier probe of every (feature, qubit) pair around the mean training
/// point; writes `spectrum.csv` (energies) and `spectrum_bins.csv`
/// (`feature,qubit,frequency,magnitude`).
pub fn cmd_spectrum(cfg: &RunConfig, model: Option<&Path>, samples: usize) -> anyhow::Result<Vec<SpectrumRow>> {
    let table = read_split(cfg, "train")?;
    let f = table.features.ncols();
    let params = model_or_init(cfg, model, f)?;
    let theta = params.theta().context("the spectrum probe needs a quantum encoder (not an mlp_* variant)")?;
    let encoder = cfg.encoder.build(f)?;
    let base: Vec<f64> = table.features.row_mean().iter().copied().collect();
    let mut rows = Vec::new();
    let mut bins = csv::Writer::from_path(output_path(cfg, "spectrum_bins.csv")?)?;
    bins.write_record(["feature", "qubit", "frequency", "magnitude"])?;
    for feature in 0..f {
        for qubit in 0..f {
            let s = fourier_spectrum_probe(theta, &encoder, feature, &base, samples, qubit)?;
            for (freq, mag) in s.by_frequency() {
                bins.write_record([feature.to_string(), qubit.to_string(), freq.to_string(), mag.to_string()])?;
            }
            rows.push(SpectrumRow {
                feature,
                qubit,
                total_energy: s.total_energy,
                out_of_set_energy: s.out_of_set_energy,
                relative_out_of_set: s.relative_out_of_set(),
            });
        }
    }
    bins.flush()?;
    let mut w = csv::Writer::from_path(output_path(cfg, "spectrum.csv")?)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: ModelVariant,
    pub name: &'static str,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub specificity: f64,
    pub epochs: usize,
    pub best_epoch: usize,
}

/// Trains and tests every variant with the same data and seed; writes
/// `ablation.csv` and `ablation.txt`.
pub fn cmd_ablate(cfg: &RunConfig) -> anyhow::Result<Vec<(ModelVariant, MetricsReport)>> {
    cfg.validate()?;
    let splits = Splits::load(cfg)?;
    let mut results = Vec::new();
    let mut w = csv::Writer::from_path(output_path(cfg, "ablation.csv")?)?;
    for variant in ModelVariant::ALL {
        let (report, encoder) = fit(cfg, &splits, variant)?;
        let m = evaluate_graph(&report.params, &splits.test, &encoder)?;
        info!("{}: F1 {:.4}, FPR {:.4}", variant.display_name(), m.f1, m.fpr);
        w.serialize(AblationRow {
            variant,
            name: variant.display_name(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fpr: m.fpr,
            fnr: m.fnr,
            specificity: m.specificity,
            epochs: report.epochs_run(),
            best_epoch: report.best_epoch,
        })?;
        results.push((variant, m));
    }
    w.flush()?;
    let rows: Vec<(String, &MetricsReport)> = results.iter().map(|(v, m)| (v.display_name().to_string(), m)).collect();
    write_text(&output_path(cfg, "ablation.txt")?, &format_table(&rows))?;
    Ok(results)
}
