//! Full-batch training: BCE-with-logits, reverse-mode gradients chained with
//! parameter-shift Jacobians, Adam with coupled L2 decay, early stopping.

use std::io::Write;

use log::{debug, info};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_map::{embed_nodes_with_jacobians, EncoderConfig};
use crate::graph::{FlowGraph, HopOperators};
use crate::model::{
    check_inputs, classical_encode, classical_encoder_backward, encode, forward_from_embeddings, head_backward,
    EncoderParams, ModelParams,
};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Mean of `max(ℓ,0) − ℓy + ln(1 + e^{−|ℓ|})`.
pub fn bce_with_logits(logits: &[f64], labels: &[u8]) -> Result<f64> {
    check_labels(logits, labels)?;
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&l, &y)| l.max(0.0) - l * f64::from(y) + (-l.abs()).exp().ln_1p())
        .sum();
    Ok(total / logits.len() as f64)
}

/// `∂ bce / ∂ℓ_i = (sigmoid(ℓ_i) − y_i) / N`.
pub fn bce_logit_gradient(logits: &[f64], labels: &[u8]) -> Result<Vec<f64>> {
    check_labels(logits, labels)?;
    let n = logits.len() as f64;
    Ok(logits
        .iter()
        .zip(labels)
        .map(|(&l, &y)| (sigmoid(l) - f64::from(y)) / n)
        .collect())
}

fn check_labels(logits: &[f64], labels: &[u8]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("loss over zero nodes".into()));
    }
    if logits.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "logits vs labels",
            expected: logits.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss of `params` on `graph` (any backend).
pub fn loss(graph: &FlowGraph, hops: &HopOperators, params: &ModelParams, cfg: &EncoderConfig) -> Result<f64> {
    let z = encode(graph.features(), params, cfg)?;
    let trace = forward_from_embeddings(z, hops, params)?;
    bce_with_logits(&trace.logits, graph.labels())
}

#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    /// Same shape as the model; every entry is `∂loss/∂param`.
    pub grad: ModelParams,
}

/// Loss and its gradient with respect to every trainable parameter.
/// Quantum encoders need an exact backend.
pub fn loss_gradients(
    graph: &FlowGraph,
    hops: &HopOperators,
    params: &ModelParams,
    cfg: &EncoderConfig,
) -> Result<LossAndGrad> {
    let features = graph.features();
    check_inputs(features, params, cfg)?;
    enum EncoderTape {
        Quantum(Vec<DMatrix<f64>>),
        Classical(crate::model::ClassicalTrace),
    }
    let (z, tape) = match &params.encoder {
        EncoderParams::Quantum { theta } => {
            let (z, jac) = embed_nodes_with_jacobians(features, theta, cfg)?;
            (z, EncoderTape::Quantum(jac))
        }
        EncoderParams::Classical(enc) => {
            let trace = classical_encode(features, enc)?;
            (trace.out.clone(), EncoderTape::Classical(trace))
        }
    };
    let trace = forward_from_embeddings(z, hops, params)?;
    let loss = bce_with_logits(&trace.logits, graph.labels())?;
    let d_logits = bce_logit_gradient(&trace.logits, graph.labels())?;
    let head = head_backward(&trace, hops, params, &d_logits);

    let mut grad = params.zeros_like();
    grad.attention = head.attention;
    grad.mlp = head.mlp;
    match (tape, &mut grad.encoder, &params.encoder) {
        (EncoderTape::Quantum(jacobians), EncoderParams::Quantum { theta: g }, _) => {
            let g = g.as_mut_slice();
            for (i, jac) in jacobians.iter().enumerate() {
                for t in 0..g.len() {
                    let mut acc = 0.0;
                    for k in 0..jac.nrows() {
                        acc += head.d_z[(i, k)] * jac[(k, t)];
                    }
                    g[t] += acc;
                }
            }
        }
        (EncoderTape::Classical(enc_trace), g, EncoderParams::Classical(enc)) => {
            *g = EncoderParams::Classical(classical_encoder_backward(enc, features, &enc_trace, &head.d_z));
        }
        _ => unreachable!("gradient buffer mirrors the encoder kind"),
    }
    Ok(LossAndGrad { loss, grad })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
    /// Apply weight decay to the ansatz angles as well.
    pub decay_theta: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 1e-2,
            max_epochs: 1000,
            patience: 30,
            seed: 0,
            decay_theta: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument("max_epochs and patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// One Adam update with `weight_decay · w` added to the raw gradient.
pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    let mut w = params.flatten();
    let g = grads.flatten();
    if g.len() != w.len() || state.m.len() != w.len() || state.v.len() != w.len() {
        return Err(Error::DimensionMismatch {
            context: "adam parameters, gradients and moments",
            expected: w.len(),
            got: g.len().min(state.m.len()).min(state.v.len()),
        });
    }
    let skip_decay = if cfg.decay_theta { None } else { params.theta_range() };
    adam_update(&mut w, &g, state, cfg.learning_rate, cfg.weight_decay, skip_decay);
    params.unflatten(&w)
}

fn adam_update(
    w: &mut [f64],
    g: &[f64],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
    skip_decay: Option<std::ops::Range<usize>>,
) {
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..w.len() {
        let decays = skip_decay.as_ref().is_none_or(|r| !r.contains(&i));
        let grad = if decays { g[i] + weight_decay * w[i] } else { g[i] };
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad * grad;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Tracks the best validation loss; improvement means strictly lower.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Records the validation loss of `epoch`; returns whether it improved.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
    pub config: TrainConfig,
    /// Parameters after the best epoch's update.
    pub params: ModelParams,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    pub fn best_record(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// `epoch,train_loss,val_loss`, one row per epoch.
    pub fn write_loss_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for record in &self.epochs {
            w.serialize(record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Train and validation graphs with their hop operators.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub graph: &'a FlowGraph,
    pub hops: &'a HopOperators,
}

/// Each epoch: training loss and gradients at the current parameters, one
/// Adam step, then validation loss at the updated parameters. Returns the
/// parameters of the epoch with the lowest validation loss.
pub fn train(
    train_split: Split<'_>,
    val_split: Split<'_>,
    init: ModelParams,
    encoder: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    init.validate()?;
    if val_split.graph.n_nodes() == 0 || train_split.graph.n_nodes() == 0 {
        return Err(Error::InvalidArgument("training needs non-empty train and validation graphs".into()));
    }
    let mut params = init;
    let mut best = params.clone();
    let mut adam = AdamState::new(params.n_params());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let LossAndGrad { loss: train_loss, grad } = loss_gradients(train_split.graph, train_split.hops, &params, encoder)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("training loss {train_loss}"),
            });
        }
        if let Some(bad) = grad.flatten().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("gradient entry {bad} is not finite"),
            });
        }
        adam_step(&mut params, &grad, &mut adam, cfg)?;
        let val_loss = loss(val_split.graph, val_split.hops, &params, encoder)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("validation loss {val_loss}"),
            });
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        if stopper.observe(epoch, val_loss) {
            best = params.clone();
        } else if stopper.should_stop() {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }
    info!(
        "stopped after {} epochs ({:?}); best epoch {} with validation loss {:.6}",
        epochs.len(),
        stop_reason,
        stopper.best_epoch(),
        stopper.best_loss()
    );
    Ok(TrainReport {
        epochs,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best_loss(),
        stop_reason,
        config: *cfg,
        params: best,
    })
}
