//! Run configuration: a TOML file whose values can be overridden from the
//! command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qagnn::data::PipelineConfig;
use qagnn::feature_map::{Backend, EncoderConfig};
use qagnn::graph::GraphOptions;
use qagnn::model::{Activation, ModelConfig, ModelVariant};
use qagnn::quantum::NoiseModel;
use qagnn::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub graph: GraphOptions,
    pub encoder: EncoderSection,
    pub model: ModelSection,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            data: DataSection::default(),
            graph: GraphOptions::default(),
            encoder: EncoderSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Raw flow CSV consumed by `preprocess`.
    pub input: Option<PathBuf>,
    /// Directory holding `train.csv`, `val.csv` and `test.csv`; defaults to
    /// `output_dir`.
    pub splits_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Statevector,
    Density,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSection {
    pub n_layers: usize,
    pub backend: BackendKind,
    /// Depolarizing probability for the density backend.
    pub noise_p: f64,
    pub shots: u64,
    pub seed: u64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            n_layers: 2,
            backend: BackendKind::Statevector,
            noise_p: 0.0,
            shots: 1024,
            seed: 0,
        }
    }
}

impl EncoderSection {
    pub fn backend(&self) -> anyhow::Result<Backend> {
        Ok(match self.backend {
            BackendKind::Statevector => Backend::ExactStatevector,
            BackendKind::Density => Backend::ExactDensity {
                noise: NoiseModel::new(self.noise_p)?,
            },
            BackendKind::Sampled => Backend::Sampled {
                shots: self.shots,
                seed: self.seed,
            },
        })
    }

    /// Encoder for `n_features` inputs (one qubit per feature).
    pub fn build(&self, n_features: usize) -> anyhow::Result<EncoderConfig> {
        Ok(EncoderConfig::new(n_features, self.n_layers, self.backend()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub variant: ModelVariant,
    pub hidden: usize,
    pub fusion: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Full,
            hidden: 8,
            fusion: Activation::Relu,
        }
    }
}

impl ModelSection {
    pub fn build(&self, n_features: usize, n_layers: usize) -> anyhow::Result<ModelConfig> {
        let mut c = ModelConfig::new(self.variant, n_features, n_layers, self.hidden)?;
        c.fusion = self.fusion;
        Ok(c)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn splits_dir(&self) -> &Path {
        self.data.splits_dir.as_deref().unwrap_or(&self.output_dir)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.train.validate()?;
        if !(self.graph.threshold > -1.0 && self.graph.threshold <= 1.0) {
            bail!("graph threshold {} outside (-1, 1]", self.graph.threshold);
        }
        self.encoder.backend()?;
        if self.model.hidden == 0 {
            bail!("model hidden width must be at least 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
