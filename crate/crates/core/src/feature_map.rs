//! The quantum node encoder: RY angle encoding followed by an EfficientSU2
//! ansatz with a linear CNOT chain, read out as single-qubit Pauli-Z
//! expectations.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{
    expect_z_sampled, expectations, param_shift_all, run_statevector, Circuit, Gate, NoiseModel,
};

/// Rotations per qubit per ansatz layer.
pub const SLOTS_PER_QUBIT: usize = 4;

/// Position of a trainable rotation inside one qubit's block of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationSlot {
    PreY = 0,
    PreZ = 1,
    PostY = 2,
    PostZ = 3,
}

/// How expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    ExactStatevector,
    ExactDensity { noise: NoiseModel },
    Sampled { shots: u64, seed: u64 },
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::ExactStatevector => "exact_statevector",
            Backend::ExactDensity { .. } => "exact_density",
            Backend::Sampled { .. } => "sampled",
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Backend::Sampled { .. })
    }

    fn noise(&self) -> Option<&NoiseModel> {
        match self {
            Backend::ExactDensity { noise } => Some(noise),
            _ => None,
        }
    }

    fn require_exact(&self, operation: &'static str) -> Result<()> {
        if self.is_exact() {
            Ok(())
        } else {
            Err(Error::UnsupportedBackend {
                operation,
                backend: self.name(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub backend: Backend,
}

impl EncoderConfig {
    pub fn new(n_qubits: usize, n_layers: usize, backend: Backend) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::quantum::MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "encoder needs 1..={} qubits, got {n_qubits}",
                crate::quantum::MAX_QUBITS
            )));
        }
        if n_layers == 0 {
            return Err(Error::InvalidArgument("ansatz needs at least one layer".into()));
        }
        if let Backend::Sampled { shots: 0, .. } = backend {
            return Err(Error::InvalidArgument("sampled backend needs at least one shot".into()));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            backend,
        })
    }

    /// Noiseless statevector encoder.
    pub fn exact(n_qubits: usize, n_layers: usize) -> Result<Self> {
        Self::new(n_qubits, n_layers, Backend::ExactStatevector)
    }

    pub fn n_params(&self) -> usize {
        SLOTS_PER_QUBIT * self.n_qubits * self.n_layers
    }

    pub fn with_backend(self, backend: Backend) -> Self {
        Self { backend, ..self }
    }
}

/// Trainable ansatz angles, ordered layer-major, then qubit, then
/// [`RotationSlot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    n_qubits: usize,
    n_layers: usize,
    theta: Vec<f64>,
}

impl AnsatzParams {
    pub fn zeros(n_qubits: usize, n_layers: usize) -> Self {
        Self {
            n_qubits,
            n_layers,
            theta: vec![0.0; SLOTS_PER_QUBIT * n_qubits * n_layers],
        }
    }

    pub fn from_vec(n_qubits: usize, n_layers: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = SLOTS_PER_QUBIT * n_qubits * n_layers;
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "ansatz parameters",
                expected,
                got: theta.len(),
            });
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite ansatz angle {bad}")));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            theta,
        })
    }

    /// Angles drawn uniformly from `[-half_width, half_width]`.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, n_layers: usize, half_width: f64, rng: &mut R) -> Self {
        let theta = (0..SLOTS_PER_QUBIT * n_qubits * n_layers)
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect();
        Self {
            n_qubits,
            n_layers,
            theta,
        }
    }

    pub fn index(n_qubits: usize, layer: usize, qubit: usize, slot: RotationSlot) -> usize {
        (layer * n_qubits + qubit) * SLOTS_PER_QUBIT + slot as usize
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn check(&self, cfg: &EncoderConfig) -> Result<()> {
        if self.n_qubits != cfg.n_qubits || self.n_layers != cfg.n_layers {
            return Err(Error::DimensionMismatch {
                context: "ansatz parameters vs encoder config",
                expected: cfg.n_params(),
                got: self.theta.len(),
            });
        }
        Ok(())
    }
}

/// Per-node embedding `z_k = ⟨Z_k⟩`, one entry per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding(Vec<f64>);

impl NodeEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &NodeEmbedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Encoding rotations `RY(x_k)` on qubit `k`, then `n_layers` ansatz layers of
/// `[RY, RZ]` per qubit, a CNOT chain `q → q+1`, and `[RY, RZ]` per qubit
/// again. Ansatz rotations are bound to their theta slot; encoding rotations
/// are unbound.
pub fn build_circuit(x: &[f64], params: &AnsatzParams, cfg: &EncoderConfig) -> Result<Circuit> {
    if x.len() != cfg.n_qubits {
        return Err(Error::DimensionMismatch {
            context: "node features vs encoder qubits",
            expected: cfg.n_qubits,
            got: x.len(),
        });
    }
    params.check(cfg)?;
    let n = cfg.n_qubits;
    let theta = params.as_slice();
    let mut gates = Vec::with_capacity(n + cfg.n_layers * (4 * n + n.saturating_sub(1)));
    gates.extend(x.iter().enumerate().map(|(k, &xk)| Gate::ry(k, xk)));
    let rotation_pair = |gates: &mut Vec<Gate>, layer: usize, y: RotationSlot, z: RotationSlot| {
        for q in 0..n {
            let iy = AnsatzParams::index(n, layer, q, y);
            let iz = AnsatzParams::index(n, layer, q, z);
            gates.push(Gate::ry(q, theta[iy]).bound(iy));
            gates.push(Gate::rz(q, theta[iz]).bound(iz));
        }
    };
    for layer in 0..cfg.n_layers {
        rotation_pair(&mut gates, layer, RotationSlot::PreY, RotationSlot::PreZ);
        gates.extend((0..n.saturating_sub(1)).map(|q| Gate::cnot(q, q + 1)));
        rotation_pair(&mut gates, layer, RotationSlot::PostY, RotationSlot::PostZ);
    }
    Circuit::from_gates(n, gates)
}

fn mix_seed(seed: u64, node: u64, qubit: u64) -> u64 {
    // splitmix64 finaliser over a simple combination
    let mut z = seed
        .wrapping_add(node.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(qubit.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn embed_indexed(
    x: &[f64],
    params: &AnsatzParams,
    cfg: &EncoderConfig,
    node: u64,
) -> Result<NodeEmbedding> {
    let circuit = build_circuit(x, params, cfg)?;
    let z = match cfg.backend {
        Backend::ExactStatevector => expectations(&circuit, None),
        Backend::ExactDensity { noise } => expectations(&circuit, Some(&noise)),
        Backend::Sampled { shots, seed } => {
            let state = run_statevector(&circuit);
            (0..cfg.n_qubits)
                .map(|q| expect_z_sampled(&state, q, shots, mix_seed(seed, node, q as u64)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(NodeEmbedding(z))
}

/// Embedding of a single feature vector under the configured backend.
pub fn embed_node(x: &[f64], params: &AnsatzParams, cfg: &EncoderConfig) -> Result<NodeEmbedding> {
    embed_indexed(x, params, cfg, 0)
}

/// Embeds every row of `features` (N × F) into an N × n_qubits matrix.
/// Rows are processed in parallel and joined by index; sampled backends
/// derive a distinct stream per (node, qubit) from the configured seed.
pub fn embed_nodes(
    features: &DMatrix<f64>,
    params: &AnsatzParams,
    cfg: &EncoderConfig,
) -> Result<DMatrix<f64>> {
    let rows: Vec<NodeEmbedding> = (0..features.nrows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = features.row(i).iter().copied().collect();
            embed_indexed(&x, params, cfg, i as u64)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(features.nrows(), cfg.n_qubits, |i, k| rows[i].0[k]))
}

/// `∂⟨Z_k⟩/∂θ_t` for every qubit `k` and theta slot `t` (n_qubits × |θ|), by
/// the parameter-shift rule. Exact backends only.
pub fn embed_jacobian(x: &[f64], params: &AnsatzParams, cfg: &EncoderConfig) -> Result<DMatrix<f64>> {
    cfg.backend.require_exact("embedding jacobian")?;
    let circuit = build_circuit(x, params, cfg)?;
    let noise = cfg.backend.noise();
    let mut jac = DMatrix::zeros(cfg.n_qubits, params.len());
    for t in 0..params.len() {
        let column = param_shift_all(&circuit, t, noise)?;
        jac.column_mut(t).copy_from_slice(&column);
    }
    Ok(jac)
}

/// Embedding and Jacobian of every row, parallel over rows.
pub fn embed_nodes_with_jacobians(
    features: &DMatrix<f64>,
    params: &AnsatzParams,
    cfg: &EncoderConfig,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    cfg.backend.require_exact("embedding jacobian")?;
    let per_node: Vec<(NodeEmbedding, DMatrix<f64>)> = (0..features.nrows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = features.row(i).iter().copied().collect();
            Ok((embed_indexed(&x, params, cfg, i as u64)?, embed_jacobian(&x, params, cfg)?))
        })
        .collect::<Result<_>>()?;
    let z = DMatrix::from_fn(features.nrows(), cfg.n_qubits, |i, k| per_node[i].0 .0[k]);
    let jacobians = per_node.into_iter().map(|(_, j)| j).collect();
    Ok((z, jacobians))
}

/// Pauli expectation kernel `Σ_k z_k(x)·z_k(x′)`.
pub fn pauli_kernel(x: &[f64], x_prime: &[f64], params: &AnsatzParams, cfg: &EncoderConfig) -> Result<f64> {
    let a = embed_node(x, params, cfg)?;
    let b = embed_node(x_prime, params, cfg)?;
    Ok(a.dot(&b))
}

/// State-overlap kernel `|⟨ψ(x′)|ψ(x)⟩|²`, noiseless statevector only.
pub fn fidelity_kernel(x: &[f64], x_prime: &[f64], params: &AnsatzParams, cfg: &EncoderConfig) -> Result<f64> {
    require_statevector(cfg)?;
    let a = run_statevector(&build_circuit(x, params, cfg)?);
    let b = run_statevector(&build_circuit(x_prime, params, cfg)?);
    Ok(b.inner(&a)?.norm_sqr().min(1.0))
}

fn require_statevector(cfg: &EncoderConfig) -> Result<()> {
    match cfg.backend {
        Backend::ExactStatevector => Ok(()),
        other => Err(Error::UnsupportedBackend {
            operation: "fidelity kernel",
            backend: other.name(),
        }),
    }
}

/// Pauli kernel Gram matrix over the rows of `points`.
pub fn pauli_gram(points: &DMatrix<f64>, params: &AnsatzParams, cfg: &EncoderConfig) -> Result<DMatrix<f64>> {
    let z = embed_nodes(points, params, cfg)?;
    let n = z.nrows();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = z.row(i).dot(&z.row(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Fidelity kernel Gram matrix over the rows of `points`.
pub fn fidelity_gram(points: &DMatrix<f64>, params: &AnsatzParams, cfg: &EncoderConfig) -> Result<DMatrix<f64>> {
    require_statevector(cfg)?;
    let states = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = points.row(i).iter().copied().collect();
            Ok(run_statevector(&build_circuit(&x, params, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = states.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        gram[(i, i)] = states[i].inner(&states[i])?.norm_sqr().min(1.0);
        for j in i + 1..n {
            let v = states[i].inner(&states[j])?.norm_sqr().min(1.0);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Frequencies whose energy counts as "in set" for [`Spectrum::out_of_set_energy`].
pub const MAX_IN_SET_FREQUENCY: i64 = 2;

/// Discrete Fourier spectrum of one expectation along one feature axis.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub feature: usize,
    pub qubit: usize,
    /// `|c_ω|` indexed by FFT bin; bin `k` holds frequency [`Spectrum::frequency`]`(k)`.
    pub magnitudes: Vec<f64>,
    pub total_energy: f64,
    pub out_of_set_energy: f64,
}

impl Spectrum {
    /// Signed integer frequency of FFT bin `k`.
    pub fn frequency(&self, k: usize) -> i64 {
        let n = self.magnitudes.len();
        if k <= n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    pub fn relative_out_of_set(&self) -> f64 {
        if self.total_energy > 0.0 {
            self.out_of_set_energy / self.total_energy
        } else {
            0.0
        }
    }

    /// `(frequency, magnitude)` pairs sorted by frequency.
    pub fn by_frequency(&self) -> Vec<(i64, f64)> {
        let mut out: Vec<(i64, f64)> = self
            .magnitudes
            .iter()
            .enumerate()
            .map(|(k, &m)| (self.frequency(k), m))
            .collect();
        out.sort_by_key(|(f, _)| *f);
        out
    }
}

/// Sweeps `x[feature_index]` over `n_samples` equispaced points in `[0, 2π)`,
/// holding the other coordinates at `base_point`, records `⟨Z_qubit⟩`, and
/// returns the normalised DFT magnitudes `|c_ω|` with `f(x) = Σ c_ω e^{iωx}`.
pub fn fourier_spectrum_probe(
    params: &AnsatzParams,
    cfg: &EncoderConfig,
    feature_index: usize,
    base_point: &[f64],
    n_samples: usize,
    qubit: usize,
) -> Result<Spectrum> {
    cfg.backend.require_exact("Fourier spectrum probe")?;
    if n_samples < 16 || !n_samples.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "sample count {n_samples} must be a power of two ≥ 16"
        )));
    }
    if feature_index >= cfg.n_qubits {
        return Err(Error::InvalidArgument(format!(
            "feature {feature_index} outside 0..{}",
            cfg.n_qubits
        )));
    }
    if qubit >= cfg.n_qubits {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            n_qubits: cfg.n_qubits,
        });
    }
    if base_point.len() != cfg.n_qubits {
        return Err(Error::DimensionMismatch {
            context: "spectrum base point",
            expected: cfg.n_qubits,
            got: base_point.len(),
        });
    }
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut x = base_point.to_vec();
            x[feature_index] = TAU * s as f64 / n_samples as f64;
            let circuit = build_circuit(&x, params, cfg)?;
            Ok(expectations(&circuit, cfg.backend.noise())[qubit])
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut buffer: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n_samples).process(&mut buffer);
    let magnitudes: Vec<f64> = buffer.iter().map(|c| c.norm() / n_samples as f64).collect();

    let mut spectrum = Spectrum {
        feature: feature_index,
        qubit,
        magnitudes,
        total_energy: 0.0,
        out_of_set_energy: 0.0,
    };
    for k in 0..n_samples {
        let energy = spectrum.magnitudes[k].powi(2);
        spectrum.total_energy += energy;
        if spectrum.frequency(k).abs() > MAX_IN_SET_FREQUENCY {
            spectrum.out_of_set_energy += energy;
        }
    }
    Ok(spectrum)
}
