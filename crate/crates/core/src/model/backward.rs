use nalgebra::DMatrix;

use super::forward::{ClassicalTrace, ForwardTrace};
use super::params::{AttentionParams, ClassicalEncoder, HopAttention, MlpParams, ModelParams};
use crate::graph::HopOperators;

/// Gradients of the classical head and attention, plus the loss gradient
/// with respect to every embedding entry.
#[derive(Debug, Clone)]
pub struct HeadGradients {
    pub attention: AttentionParams,
    pub mlp: MlpParams,
    /// `∂L/∂Z` (N × d), summed over the direct fusion path, the attention
    /// scores of both hops, and each node's appearance as a neighbour.
    pub d_z: DMatrix<f64>,
}

/// Reverse-mode pass from `∂L/∂logits` back to the embeddings.
pub fn head_backward(
    trace: &ForwardTrace,
    hops: &HopOperators,
    params: &ModelParams,
    d_logits: &[f64],
) -> HeadGradients {
    let (n, d) = trace.z.shape();
    let mlp = &params.mlp;
    let hidden = mlp.w_h.len();

    let mut g_mlp = MlpParams {
        w_h: vec![vec![0.0; d]; hidden],
        b_h: vec![0.0; hidden],
        w_o: vec![0.0; hidden],
        b_o: 0.0,
    };
    let mut d_fused = DMatrix::<f64>::zeros(n, d);
    for i in 0..n {
        let dl = d_logits[i];
        g_mlp.b_o += dl;
        for u in 0..hidden {
            let pre = trace.head_pre[(i, u)];
            g_mlp.w_o[u] += dl * pre.max(0.0);
            if pre > 0.0 {
                let du = dl * mlp.w_o[u];
                g_mlp.b_h[u] += du;
                for k in 0..d {
                    g_mlp.w_h[u][k] += du * trace.fused[(i, k)];
                    d_fused[(i, k)] += du * mlp.w_h[u][k];
                }
            }
        }
    }

    let fusion = params.config.fusion;
    let d_pre = DMatrix::from_fn(n, d, |i, k| d_fused[(i, k)] * fusion.derivative(trace.pre_fusion[(i, k)]));

    let mut d_z = d_pre.clone();
    let zero_hop = || HopAttention {
        w: vec![0.0; d],
        b: 0.0,
    };
    let mut g_att = AttentionParams {
        one_hop: zero_hop(),
        two_hop: zero_hop(),
    };
    let variant = params.config.variant;
    let operators = [hops.a1_f64(), hops.a2_f64()];
    for (idx, hop) in [1usize, 2].into_iter().enumerate() {
        if !variant.uses_hop(hop) {
            continue;
        }
        let a = &operators[idx];
        let alpha = &trace.alpha[idx];
        // back_j = Σ_i A_ij ∂L/∂pre_i
        let back = a.transpose() * &d_pre;
        for j in 0..n {
            for k in 0..d {
                d_z[(j, k)] += alpha[j] * back[(j, k)];
            }
        }
        if variant.uses_attention() {
            let g: Vec<f64> = (0..n).map(|j| trace.z.row(j).dot(&back.row(j))).collect();
            let mean: f64 = alpha.iter().zip(&g).map(|(a, g)| a * g).sum();
            let att = params.attention.hop(hop);
            let grad = g_att.hop_mut(hop);
            for j in 0..n {
                let ds = alpha[j] * (g[j] - mean);
                grad.b += ds;
                for k in 0..d {
                    grad.w[k] += ds * trace.z[(j, k)];
                    d_z[(j, k)] += ds * att.w[k];
                }
            }
        }
    }

    HeadGradients {
        attention: g_att,
        mlp: g_mlp,
        d_z,
    }
}

/// Gradient of the classical encoder given `∂L/∂Z`.
pub fn classical_encoder_backward(
    enc: &ClassicalEncoder,
    features: &DMatrix<f64>,
    trace: &ClassicalTrace,
    d_z: &DMatrix<f64>,
) -> ClassicalEncoder {
    let (n, f) = features.shape();
    let h = enc.w1.len();
    let d = enc.w2.len();
    let mut g = ClassicalEncoder {
        w1: vec![vec![0.0; f]; h],
        b1: vec![0.0; h],
        w2: vec![vec![0.0; h]; d],
        b2: vec![0.0; d],
    };
    for i in 0..n {
        let mut d_hidden = vec![0.0; h];
        for k in 0..d {
            let out = trace.out[(i, k)];
            let d_pre = d_z[(i, k)] * (1.0 - out * out);
            g.b2[k] += d_pre;
            for u in 0..h {
                g.w2[k][u] += d_pre * trace.hidden[(i, u)];
                d_hidden[u] += d_pre * enc.w2[k][u];
            }
        }
        for u in 0..h {
            let hu = trace.hidden[(i, u)];
            let d_pre = d_hidden[u] * (1.0 - hu * hu);
            g.b1[u] += d_pre;
            for c in 0..f {
                g.w1[u][c] += d_pre * features[(i, c)];
            }
        }
    }
    g
}
