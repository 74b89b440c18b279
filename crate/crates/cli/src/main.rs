use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qagnn::model::ModelVariant;
use qagnn_cli::commands::{
    cmd_ablate, cmd_embed, cmd_evaluate, cmd_generate, cmd_kernel, cmd_preprocess, cmd_spectrum, cmd_threshold_sweep,
    cmd_train,
};
use qagnn_cli::config::{BackendKind, RunConfig};
use qagnn_cli::synth::SynthOptions;

#[derive(Parser)]
#[command(name = "qagnn", version, about = "Quantum attentive graph neural network for flow intrusion detection")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Values that replace the corresponding config-file entries.
#[derive(Args, Default)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Raw flow CSV for preprocess.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Directory with train/val/test CSVs.
    #[arg(long, global = true)]
    splits_dir: Option<PathBuf>,
    /// Seed for splitting and parameter initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    variant: Option<ModelVariant>,
    #[arg(long, global = true)]
    layers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long, global = true)]
    noise: Option<f64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    weight_decay: Option<f64>,
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    #[arg(long, global = true)]
    patience: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = &self.input {
            c.data.input = Some(v.clone());
        }
        if let Some(v) = &self.splits_dir {
            c.data.splits_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            c.data.pipeline.seed = v;
            c.train.seed = v;
            c.encoder.seed = v;
        }
        if let Some(v) = self.threshold {
            c.graph.threshold = v;
        }
        if let Some(v) = self.variant {
            c.model.variant = v;
        }
        if let Some(v) = self.layers {
            c.encoder.n_layers = v;
        }
        if let Some(v) = self.backend {
            c.encoder.backend = v;
        }
        if let Some(v) = self.noise {
            c.encoder.noise_p = v;
        }
        if let Some(v) = self.shots {
            c.encoder.shots = v;
        }
        if let Some(v) = self.learning_rate {
            c.train.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            c.train.weight_decay = v;
        }
        if let Some(v) = self.max_epochs {
            c.train.max_epochs = v;
        }
        if let Some(v) = self.patience {
            c.train.patience = v;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-cluster flow CSV.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 150)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        features: usize,
        #[arg(long, default_value_t = 3)]
        flows_per_node: usize,
        #[arg(long, default_value_t = 0.03)]
        spread: f64,
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
    },
    /// Clean, aggregate, split, scale and project a flow CSV.
    Preprocess,
    /// Train the configured variant on the preprocessed splits.
    Train,
    /// Score a saved model on one split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Retrain at several similarity thresholds.
    ThresholdSweep {
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.7,0.8,0.9,0.95")]
        thresholds: Vec<f64>,
    },
    /// Export node embeddings.
    Embed {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Export Pauli and fidelity Gram matrices.
    Kernel {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        max_points: usize,
    },
    /// Export the Fourier spectrum of the encoder.
    Spectrum {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Train and test every model variant.
    Ablate,
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

fn table(variant: ModelVariant, m: &qagnn::metrics::MetricsReport) -> String {
    qagnn::metrics::format_table(&[(variant.display_name().to_string(), m)])
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Generate {
            out,
            nodes,
            features,
            flows_per_node,
            spread,
            label_noise,
        } => {
            let opts = SynthOptions {
                nodes,
                features,
                flows_per_node,
                spread,
                label_noise,
                seed: cli.overrides.seed.unwrap_or(0),
                ..SynthOptions::default()
            };
            cmd_generate(&opts, &out)?;
        }
        Command::Preprocess => {
            let m = cmd_preprocess(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&m.split_sizes)?);
        }
        Command::Train => {
            let out = cmd_train(&cfg)?;
            print!("{}", table(cfg.model.variant, &out.test_metrics));
        }
        Command::Evaluate { model, split } => {
            let params = qagnn_cli::commands::load_model(&model)?;
            print!("{}", table(params.config.variant, &cmd_evaluate(&cfg, &model, &split)?));
        }
        Command::ThresholdSweep { thresholds } => {
            println!("threshold,f1,fpr");
            for r in cmd_threshold_sweep(&cfg, &thresholds)? {
                println!("{},{:.4},{:.4}", r.threshold, r.f1, r.fpr);
            }
        }
        Command::Embed { model } => {
            cmd_embed(&cfg, model.as_deref())?;
        }
        Command::Kernel { model, max_points } => {
            cmd_kernel(&cfg, model.as_deref(), max_points)?;
        }
        Command::Spectrum { model, samples } => {
            let rows = cmd_spectrum(&cfg, model.as_deref(), samples)?;
            let worst = rows.iter().map(|r| r.relative_out_of_set).fold(0.0, f64::max);
            println!("largest relative out-of-band energy: {worst:.3e}");
        }
        Command::Ablate => {
            let results = cmd_ablate(&cfg)?;
            let rows: Vec<_> = results.iter().map(|(v, m)| (v.display_name().to_string(), m)).collect();
            print!("{}", qagnn::metrics::format_table(&rows));
        }
        Command::ShowConfig => print!("{}", cfg.to_toml().context("serializing config")?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
