use nalgebra::DMatrix;

use super::params::{Activation, ClassicalEncoder, EncoderParams, MlpParams, ModelParams};
use crate::error::{Error, Result};
use crate::feature_map::{embed_nodes, EncoderConfig};
use crate::graph::{FlowGraph, HopOperators};

fn shape_check(context: &'static str, expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected: expected.0 * expected.1,
            got: got.0 * got.1,
        });
    }
    Ok(())
}

/// Global softmax over all nodes of `w · z_j + b`.
pub fn attention_weights(z: &DMatrix<f64>, w: &[f64], b: f64) -> Result<Vec<f64>> {
    if z.nrows() == 0 {
        return Err(Error::InvalidArgument("attention over an empty graph".into()));
    }
    if w.len() != z.ncols() {
        return Err(Error::DimensionMismatch {
            context: "attention weights vs embedding width",
            expected: z.ncols(),
            got: w.len(),
        });
    }
    let scores: Vec<f64> = (0..z.nrows())
        .map(|j| w.iter().enumerate().map(|(k, wk)| wk * z[(j, k)]).sum::<f64>() + b)
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / total).collect())
}

/// `A_hop · diag(α) · Z`, row `i` = `Σ_j A_hop[i,j] α_j z_j`.
pub fn aggregate(a_hop: &DMatrix<f64>, alpha: &[f64], z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    shape_check("hop operator", (n, n), a_hop.shape())?;
    if alpha.len() != n {
        return Err(Error::DimensionMismatch {
            context: "attention vector vs node count",
            expected: n,
            got: alpha.len(),
        });
    }
    let d = z.ncols();
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            let c = a_hop[(i, j)] * alpha[j];
            if c != 0.0 {
                for k in 0..d {
                    out[(i, k)] += c * z[(j, k)];
                }
            }
        }
    }
    Ok(out)
}

/// Elementwise `σ(Z + Z1 + Z2)`.
pub fn fuse(z: &DMatrix<f64>, z1: &DMatrix<f64>, z2: &DMatrix<f64>, activation: Activation) -> Result<DMatrix<f64>> {
    shape_check("fusion input", z.shape(), z1.shape())?;
    shape_check("fusion input", z.shape(), z2.shape())?;
    Ok((z + z1 + z2).map(|v| activation.apply(v)))
}

fn head_hidden(h: &DMatrix<f64>, mlp: &MlpParams) -> Result<DMatrix<f64>> {
    if mlp.w_h.iter().any(|r| r.len() != h.ncols()) {
        return Err(Error::DimensionMismatch {
            context: "head input width",
            expected: mlp.w_h.first().map_or(0, Vec::len),
            got: h.ncols(),
        });
    }
    Ok(DMatrix::from_fn(h.nrows(), mlp.w_h.len(), |i, u| {
        mlp.w_h[u].iter().enumerate().map(|(k, w)| w * h[(i, k)]).sum::<f64>() + mlp.b_h[u]
    }))
}

fn head_output(hidden_pre: &DMatrix<f64>, mlp: &MlpParams) -> Vec<f64> {
    (0..hidden_pre.nrows())
        .map(|i| {
            mlp.w_o
                .iter()
                .enumerate()
                .map(|(u, w)| w * hidden_pre[(i, u)].max(0.0))
                .sum::<f64>()
                + mlp.b_o
        })
        .collect()
}

/// `logit_i = w_o · ReLU(W_h h_i + b_h) + b_o`.
pub fn mlp_forward(h: &DMatrix<f64>, mlp: &MlpParams) -> Result<Vec<f64>> {
    Ok(head_output(&head_hidden(h, mlp)?, mlp))
}

/// Intermediate activations of the classical encoder.
#[derive(Debug, Clone)]
pub struct ClassicalTrace {
    pub hidden: DMatrix<f64>,
    pub out: DMatrix<f64>,
}

pub fn classical_encode(features: &DMatrix<f64>, enc: &ClassicalEncoder) -> Result<ClassicalTrace> {
    if enc.w1.iter().any(|r| r.len() != features.ncols()) {
        return Err(Error::DimensionMismatch {
            context: "classical encoder input width",
            expected: enc.w1.first().map_or(0, Vec::len),
            got: features.ncols(),
        });
    }
    let n = features.nrows();
    let hidden = DMatrix::from_fn(n, enc.w1.len(), |i, u| {
        (enc.w1[u].iter().enumerate().map(|(k, w)| w * features[(i, k)]).sum::<f64>() + enc.b1[u]).tanh()
    });
    let out = DMatrix::from_fn(n, enc.w2.len(), |i, k| {
        (enc.w2[k].iter().enumerate().map(|(u, w)| w * hidden[(i, u)]).sum::<f64>() + enc.b2[k]).tanh()
    });
    Ok(ClassicalTrace { hidden, out })
}

pub(crate) fn check_inputs(features: &DMatrix<f64>, params: &ModelParams, cfg: &EncoderConfig) -> Result<()> {
    let c = &params.config;
    if features.ncols() != c.n_features {
        return Err(Error::DimensionMismatch {
            context: "graph features vs model input",
            expected: c.n_features,
            got: features.ncols(),
        });
    }
    if c.variant.uses_quantum_encoder() && (cfg.n_qubits != c.n_features || cfg.n_layers != c.n_layers) {
        return Err(Error::InvalidArgument(format!(
            "encoder config ({} qubits, {} layers) does not match model (F={}, L={})",
            cfg.n_qubits, cfg.n_layers, c.n_features, c.n_layers
        )));
    }
    Ok(())
}

/// Node embeddings `Z` (N × d) from the variant's encoder.
pub fn encode(features: &DMatrix<f64>, params: &ModelParams, cfg: &EncoderConfig) -> Result<DMatrix<f64>> {
    check_inputs(features, params, cfg)?;
    match &params.encoder {
        EncoderParams::Quantum { theta } => embed_nodes(features, theta, cfg),
        EncoderParams::Classical(enc) => Ok(classical_encode(features, enc)?.out),
    }
}

/// Every intermediate of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub z: DMatrix<f64>,
    /// Attention over nodes per hop (index 0 = one hop, 1 = two hops);
    /// uniform `1/N` when the variant has no attention.
    pub alpha: [Vec<f64>; 2],
    /// Aggregated embeddings per hop; zero when the variant drops the hop.
    pub aggregated: [DMatrix<f64>; 2],
    pub pre_fusion: DMatrix<f64>,
    pub fused: DMatrix<f64>,
    pub head_pre: DMatrix<f64>,
    pub logits: Vec<f64>,
}

/// Everything after the encoder: attention, hop aggregation, fusion and head.
pub fn forward_from_embeddings(z: DMatrix<f64>, hops: &HopOperators, params: &ModelParams) -> Result<ForwardTrace> {
    let n = z.nrows();
    let d = params.config.embed_dim();
    shape_check("embeddings", (n, d), z.shape())?;
    let variant = params.config.variant;
    let operators = [hops.a1_f64(), hops.a2_f64()];
    let mut alpha: [Vec<f64>; 2] = Default::default();
    let mut aggregated = [DMatrix::zeros(n, d), DMatrix::zeros(n, d)];
    for (idx, hop) in [1usize, 2].into_iter().enumerate() {
        alpha[idx] = if variant.uses_attention() {
            let att = params.attention.hop(hop);
            attention_weights(&z, &att.w, att.b)?
        } else {
            vec![1.0 / n as f64; n]
        };
        if variant.uses_hop(hop) {
            aggregated[idx] = aggregate(&operators[idx], &alpha[idx], &z)?;
        }
    }
    let pre_fusion = &z + &aggregated[0] + &aggregated[1];
    let fusion = params.config.fusion;
    let fused = pre_fusion.map(|v| fusion.apply(v));
    let head_pre = head_hidden(&fused, &params.mlp)?;
    let logits = head_output(&head_pre, &params.mlp);
    Ok(ForwardTrace {
        z,
        alpha,
        aggregated,
        pre_fusion,
        fused,
        head_pre,
        logits,
    })
}

pub fn forward_trace(
    graph: &FlowGraph,
    hops: &HopOperators,
    params: &ModelParams,
    cfg: &EncoderConfig,
) -> Result<ForwardTrace> {
    let z = encode(graph.features(), params, cfg)?;
    forward_from_embeddings(z, hops, params)
}

/// Per-node intrusion logits.
pub fn forward(graph: &FlowGraph, hops: &HopOperators, params: &ModelParams, cfg: &EncoderConfig) -> Result<Vec<f64>> {
    Ok(forward_trace(graph, hops, params, cfg)?.logits)
}

/// `1` (attack) iff `sigmoid(logit) ≥ 0.5`, i.e. `logit ≥ 0`.
pub fn predict(logits: &[f64]) -> Vec<u8> {
    logits.iter().map(|&l| u8::from(l >= 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_attention_for_identical_rows() {
        let z = DMatrix::from_element(5, 3, 0.4);
        let a = attention_weights(&z, &[0.3, -1.0, 2.0], 0.7).unwrap();
        assert!(a.iter().all(|v| (v - 0.2).abs() < 1e-15));
        let one = attention_weights(&DMatrix::from_element(1, 2, 0.1), &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(one, vec![1.0]);
    }

    #[test]
    fn attention_ratio_follows_scores() {
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 0.9, 2f64.ln(), -0.3]);
        let a = attention_weights(&z, &[1.0, 0.0], 0.0).unwrap();
        assert!((a[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((a[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn attention_is_overflow_safe() {
        let z = DMatrix::from_row_slice(2, 1, &[1000.0, 999.0]);
        let a = attention_weights(&z, &[1.0], 0.0).unwrap();
        assert!(a.iter().all(|v| v.is_finite()));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_cases() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let zero = aggregate(&DMatrix::zeros(3, 3), &[0.2, 0.3, 0.5], &z).unwrap();
        assert_eq!(zero, DMatrix::zeros(3, 2));

        let n = 4;
        let ones = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let same = DMatrix::from_fn(n, 2, |_, k| [0.3, -0.6][k]);
        let out = aggregate(&ones, &vec![0.25; n], &same).unwrap();
        for i in 0..n {
            assert!((out[(i, 0)] - 0.75 * 0.3).abs() < 1e-15);
            assert!((out[(i, 1)] + 0.75 * 0.6).abs() < 1e-15);
        }
        assert!(aggregate(&DMatrix::zeros(2, 2), &[0.5, 0.5], &z).is_err());
        assert!(aggregate(&DMatrix::zeros(3, 3), &[0.5, 0.5], &z).is_err());
    }

    #[test]
    fn fuse_cases() {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        assert_eq!(fuse(&m(0.0), &m(0.0), &m(0.0), Activation::Relu).unwrap(), m(0.0));
        assert_eq!(fuse(&m(1.0), &m(-2.0), &m(0.5), Activation::Relu).unwrap(), m(0.0));
        let pos = fuse(&m(0.2), &m(0.3), &m(0.1), Activation::Relu).unwrap();
        assert!((pos[(0, 0)] - 0.6).abs() < 1e-15);
        let t = fuse(&m(0.2), &m(0.3), &m(0.1), Activation::Tanh).unwrap();
        assert!((t[(0, 0)] - 0.6f64.tanh()).abs() < 1e-15);
        assert!(fuse(&m(0.0), &DMatrix::zeros(2, 1), &m(0.0), Activation::Relu).is_err());
    }

    #[test]
    fn head_cases() {
        let h = DMatrix::from_row_slice(2, 3, &[0.5, -0.2, 0.9, 0.1, 0.7, 0.0]);
        let zero = MlpParams {
            w_h: vec![vec![0.0; 3]; 4],
            b_h: vec![0.0; 4],
            w_o: vec![0.0; 4],
            b_o: 1.25,
        };
        assert_eq!(mlp_forward(&h, &zero).unwrap(), vec![1.25, 1.25]);
        // one hidden unit copying component 2 (non-negative inputs)
        let pass = MlpParams {
            w_h: vec![vec![0.0, 0.0, 1.0]],
            b_h: vec![0.0],
            w_o: vec![1.0],
            b_o: 0.0,
        };
        assert_eq!(mlp_forward(&h, &pass).unwrap(), vec![0.9, 0.0]);
        assert!(mlp_forward(&DMatrix::zeros(1, 2), &pass).is_err());
    }

    #[test]
    fn predict_boundary_is_attack() {
        assert_eq!(predict(&[0.0, -3.0, 3.0, -1e-300]), vec![1, 0, 1, 0]);
    }
}
