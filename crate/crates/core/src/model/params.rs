use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_map::{AnsatzParams, SLOTS_PER_QUBIT};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Full,
    PqcNoAttention,
    OneHopAttention,
    OneHopNoAttention,
    NodeWiseQnn,
    MlpAttention,
    MlpNoAttention,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 7] = [
        ModelVariant::Full,
        ModelVariant::PqcNoAttention,
        ModelVariant::OneHopAttention,
        ModelVariant::OneHopNoAttention,
        ModelVariant::NodeWiseQnn,
        ModelVariant::MlpAttention,
        ModelVariant::MlpNoAttention,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::PqcNoAttention => "pqc_no_attention",
            ModelVariant::OneHopAttention => "one_hop_attention",
            ModelVariant::OneHopNoAttention => "one_hop_no_attention",
            ModelVariant::NodeWiseQnn => "node_wise_qnn",
            ModelVariant::MlpAttention => "mlp_attention",
            ModelVariant::MlpNoAttention => "mlp_no_attention",
        }
    }

    /// Row label used in ablation tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelVariant::Full => "Q-AGNN",
            ModelVariant::PqcNoAttention => "PQC w/o Att",
            ModelVariant::OneHopAttention => "1-Hop + Att",
            ModelVariant::OneHopNoAttention => "1-Hop w/o Att",
            ModelVariant::NodeWiseQnn => "Node-wise QNN",
            ModelVariant::MlpAttention => "MLP + Att",
            ModelVariant::MlpNoAttention => "MLP w/o Att",
        }
    }

    pub fn uses_quantum_encoder(self) -> bool {
        !matches!(self, ModelVariant::MlpAttention | ModelVariant::MlpNoAttention)
    }

    pub fn uses_attention(self) -> bool {
        matches!(
            self,
            ModelVariant::Full | ModelVariant::OneHopAttention | ModelVariant::MlpAttention
        )
    }

    /// Whether aggregation over hop `hop` (1 or 2) contributes.
    pub fn uses_hop(self, hop: usize) -> bool {
        match self {
            ModelVariant::NodeWiseQnn => false,
            ModelVariant::OneHopAttention | ModelVariant::OneHopNoAttention => hop == 1,
            _ => hop == 1 || hop == 2,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model variant {s:?}")))
    }
}

/// Fusion nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at pre-activation `x`; ReLU uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    /// Input feature dimension `F`; also the qubit count and embedding width.
    pub n_features: usize,
    /// Ansatz depth `L`.
    pub n_layers: usize,
    /// Width of the prediction head's hidden layer.
    pub hidden: usize,
    pub fusion: Activation,
}

impl ModelConfig {
    pub fn new(variant: ModelVariant, n_features: usize, n_layers: usize, hidden: usize) -> Result<Self> {
        if n_features == 0 || n_layers == 0 || hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive (F={n_features}, L={n_layers}, hidden={hidden})"
            )));
        }
        Ok(Self {
            variant,
            n_features,
            n_layers,
            hidden,
            fusion: Activation::Relu,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.n_features
    }

    pub fn n_theta(&self) -> usize {
        SLOTS_PER_QUBIT * self.n_features * self.n_layers
    }

    /// Hidden width of the classical encoder that replaces the PQC in the
    /// `mlp_*` variants: the width whose `F → h → d` parameter count is
    /// closest to `|θ|`.
    pub fn classical_hidden(&self) -> usize {
        let d = self.embed_dim();
        let per_unit = self.n_features + 1 + d;
        let target = self.n_theta().saturating_sub(d) as f64;
        ((target / per_unit as f64).round() as usize).max(1)
    }
}

/// Affine attention score `w · z_j + b` for one hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopAttention {
    pub w: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub one_hop: HopAttention,
    pub two_hop: HopAttention,
}

impl AttentionParams {
    pub fn hop(&self, hop: usize) -> &HopAttention {
        if hop == 1 {
            &self.one_hop
        } else {
            &self.two_hop
        }
    }

    pub fn hop_mut(&mut self, hop: usize) -> &mut HopAttention {
        if hop == 1 {
            &mut self.one_hop
        } else {
            &mut self.two_hop
        }
    }
}

/// One hidden ReLU layer and a scalar logit. `w_h` is `hidden × d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w_h: Vec<Vec<f64>>,
    pub b_h: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_o: f64,
}

/// `tanh(W2 · tanh(W1 x + b1) + b2)`, standing in for the PQC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEncoder {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl ClassicalEncoder {
    pub fn n_params(&self) -> usize {
        count(&self.w1) + self.b1.len() + count(&self.w2) + self.b2.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderParams {
    Quantum { theta: AnsatzParams },
    Classical(ClassicalEncoder),
}

/// Everything the optimizer updates, plus the configuration that fixes its
/// shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub format_version: u32,
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    pub attention: AttentionParams,
    pub mlp: MlpParams,
}

fn count(m: &[Vec<f64>]) -> usize {
    m.iter().map(Vec::len).sum()
}

fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..rows).map(|_| uniform_vec(cols, bound, rng)).collect()
}

fn uniform_vec<R: Rng + ?Sized>(len: usize, bound: f64, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Half-width of the uniform range used for initial ansatz angles.
pub const THETA_INIT_HALF_WIDTH: f64 = 0.1;

impl ModelParams {
    /// Classical weights uniform in `±1/√fan_in`, ansatz angles uniform in
    /// `±0.1`.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Self {
        let d = config.embed_dim();
        let f = config.n_features;
        let encoder = if config.variant.uses_quantum_encoder() {
            EncoderParams::Quantum {
                theta: AnsatzParams::random(f, config.n_layers, THETA_INIT_HALF_WIDTH, rng),
            }
        } else {
            let h = config.classical_hidden();
            let (b_in, b_hidden) = (1.0 / (f as f64).sqrt(), 1.0 / (h as f64).sqrt());
            EncoderParams::Classical(ClassicalEncoder {
                w1: uniform_matrix(h, f, b_in, rng),
                b1: uniform_vec(h, b_in, rng),
                w2: uniform_matrix(d, h, b_hidden, rng),
                b2: uniform_vec(d, b_hidden, rng),
            })
        };
        let b_d = 1.0 / (d as f64).sqrt();
        let hop = |rng: &mut R| HopAttention {
            w: uniform_vec(d, b_d, rng),
            b: rng.random_range(-b_d..=b_d),
        };
        let attention = AttentionParams {
            one_hop: hop(rng),
            two_hop: hop(rng),
        };
        let b_hidden = 1.0 / (config.hidden as f64).sqrt();
        let mlp = MlpParams {
            w_h: uniform_matrix(config.hidden, d, b_d, rng),
            b_h: uniform_vec(config.hidden, b_d, rng),
            w_o: uniform_vec(config.hidden, b_hidden, rng),
            b_o: rng.random_range(-b_hidden..=b_hidden),
        };
        Self {
            format_version: MODEL_FORMAT_VERSION,
            config,
            encoder,
            attention,
            mlp,
        }
    }

    pub fn theta(&self) -> Option<&AnsatzParams> {
        match &self.encoder {
            EncoderParams::Quantum { theta } => Some(theta),
            EncoderParams::Classical(_) => None,
        }
    }

    pub fn encoder_len(&self) -> usize {
        match &self.encoder {
            EncoderParams::Quantum { theta } => theta.len(),
            EncoderParams::Classical(enc) => enc.n_params(),
        }
    }

    /// Flattened parameter order: encoder (θ, or W1 rows, b1, W2 rows, b2),
    /// then one-hop attention (w, b), two-hop attention (w, b), then the head
    /// (W_h rows, b_h, w_o, b_o).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        match &self.encoder {
            EncoderParams::Quantum { theta } => out.extend_from_slice(theta.as_slice()),
            EncoderParams::Classical(enc) => {
                enc.w1.iter().for_each(|r| out.extend_from_slice(r));
                out.extend_from_slice(&enc.b1);
                enc.w2.iter().for_each(|r| out.extend_from_slice(r));
                out.extend_from_slice(&enc.b2);
            }
        }
        for hop in [&self.attention.one_hop, &self.attention.two_hop] {
            out.extend_from_slice(&hop.w);
            out.push(hop.b);
        }
        self.mlp.w_h.iter().for_each(|r| out.extend_from_slice(r));
        out.extend_from_slice(&self.mlp.b_h);
        out.extend_from_slice(&self.mlp.w_o);
        out.push(self.mlp.b_o);
        out
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "flattened model parameters",
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|v| *v = it.next().unwrap());
        match &mut self.encoder {
            EncoderParams::Quantum { theta } => fill(theta.as_mut_slice()),
            EncoderParams::Classical(enc) => {
                enc.w1.iter_mut().for_each(|r| fill(r));
                fill(&mut enc.b1);
                enc.w2.iter_mut().for_each(|r| fill(r));
                fill(&mut enc.b2);
            }
        }
        for hop in [&mut self.attention.one_hop, &mut self.attention.two_hop] {
            fill(&mut hop.w);
            fill(std::slice::from_mut(&mut hop.b));
        }
        self.mlp.w_h.iter_mut().for_each(|r| fill(r));
        fill(&mut self.mlp.b_h);
        fill(&mut self.mlp.w_o);
        fill(std::slice::from_mut(&mut self.mlp.b_o));
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        let attention = 2 * (self.attention.one_hop.w.len() + 1);
        let head = count(&self.mlp.w_h) + self.mlp.b_h.len() + self.mlp.w_o.len() + 1;
        self.encoder_len() + attention + head
    }

    /// Same shape with every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.unflatten(&vec![0.0; self.n_params()]).expect("same shape");
        out
    }

    /// Flat index range of the ansatz angles, if the encoder is quantum.
    pub fn theta_range(&self) -> Option<std::ops::Range<usize>> {
        self.theta().map(|t| 0..t.len())
    }

    /// Checks that every block matches `config`.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        let d = c.embed_dim();
        let bad = |what: &str| Err(Error::InvalidArgument(format!("model parameters: {what}")));
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad(&format!("unsupported format version {}", self.format_version));
        }
        match (&self.encoder, c.variant.uses_quantum_encoder()) {
            (EncoderParams::Quantum { theta }, true) => {
                if theta.n_qubits() != c.n_features || theta.n_layers() != c.n_layers {
                    return bad("ansatz shape does not match config");
                }
            }
            (EncoderParams::Classical(enc), false) => {
                let h = enc.b1.len();
                if enc.w1.len() != h
                    || enc.w1.iter().any(|r| r.len() != c.n_features)
                    || enc.w2.len() != d
                    || enc.w2.iter().any(|r| r.len() != h)
                    || enc.b2.len() != d
                {
                    return bad("classical encoder shape does not match config");
                }
            }
            _ => return bad("encoder kind does not match variant"),
        }
        if self.attention.one_hop.w.len() != d || self.attention.two_hop.w.len() != d {
            return bad("attention width does not match embedding dimension");
        }
        let m = &self.mlp;
        if m.w_h.len() != c.hidden
            || m.w_h.iter().any(|r| r.len() != d)
            || m.b_h.len() != c.hidden
            || m.w_o.len() != c.hidden
        {
            return bad("head shape does not match config");
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        Ok(())
    }
}
