//! Synthetic flow records: two Gaussian clusters, one benign and one attack,
//! in a small feature space.

use anyhow::bail;
use qagnn::data::RawDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    /// Distinct (source, destination) pairs, i.e. graph nodes.
    pub nodes: usize,
    pub features: usize,
    /// Flow records emitted per pair; they average back to the node point.
    pub flows_per_node: usize,
    /// Standard deviation of the per-node offset from its cluster centre.
    pub spread: f64,
    /// Standard deviation of per-flow jitter around the node point.
    pub flow_jitter: f64,
    /// Height of the off-axis floor of each centre; the peak is 1.
    pub floor: f64,
    pub attack_fraction: f64,
    /// Probability that a node's label is flipped.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            nodes: 150,
            features: 4,
            flows_per_node: 3,
            spread: 0.03,
            flow_jitter: 0.01,
            floor: 0.1,
            attack_fraction: 0.5,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

/// Cluster centres: benign peaks on feature 0, attack on feature `F/2`.
pub fn centres(opts: &SynthOptions) -> [Vec<f64>; 2] {
    let centre = |peak: usize| (0..opts.features).map(|k| if k == peak { 1.0 } else { opts.floor }).collect();
    [centre(0), centre(opts.features / 2)]
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: RawDataset,
    /// Per-node mean feature vector before any preprocessing.
    pub node_points: Vec<Vec<f64>>,
    /// Cluster index of each node (1 = attack cluster).
    pub clusters: Vec<u8>,
    /// Labels after label noise.
    pub labels: Vec<u8>,
}

pub fn generate(opts: &SynthOptions) -> anyhow::Result<Synthetic> {
    if opts.features < 2 {
        bail!("synthetic data needs at least 2 features");
    }
    if opts.nodes < 3 || opts.flows_per_node == 0 {
        bail!("synthetic data needs at least 3 nodes and one flow per node");
    }
    if !(0.0..=1.0).contains(&opts.attack_fraction) || !(0.0..=1.0).contains(&opts.label_noise) {
        bail!("attack_fraction and label_noise must lie in [0, 1]");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spread = Normal::new(0.0, opts.spread)?;
    let jitter = Normal::new(0.0, opts.flow_jitter)?;
    let centres = centres(opts);
    let n_attack = (opts.attack_fraction * opts.nodes as f64).round() as usize;

    let mut columns = vec!["src_ip".to_string(), "dst_ip".to_string()];
    columns.extend((0..opts.features).map(|k| format!("f{k}")));
    columns.push("label".into());

    let (mut rows, mut node_points, mut clusters, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for node in 0..opts.nodes {
        let cluster = u8::from(node % opts.nodes.max(1) < n_attack);
        let point: Vec<f64> = centres[usize::from(cluster)]
            .iter()
            .map(|c| (c + spread.sample(&mut rng)).max(0.0))
            .collect();
        let label = if rng.random_bool(opts.label_noise) { 1 - cluster } else { cluster };
        let src = format!("10.{}.{}.{}", node / 65536, (node / 256) % 256, node % 256);
        let dst = format!("192.168.0.{}", node % 7 + 1);
        // zero-sum jitter keeps the flow mean at the node point
        let offsets: Vec<Vec<f64>> = (0..opts.flows_per_node)
            .map(|_| (0..opts.features).map(|_| jitter.sample(&mut rng)).collect())
            .collect();
        for f in 0..opts.flows_per_node {
            let mut row = vec![src.clone(), dst.clone()];
            for k in 0..opts.features {
                let mean_offset = offsets.iter().map(|o| o[k]).sum::<f64>() / opts.flows_per_node as f64;
                row.push(format!("{}", point[k] + offsets[f][k] - mean_offset));
            }
            row.push(label.to_string());
            rows.push(row);
        }
        node_points.push(point);
        clusters.push(cluster);
        labels.push(label);
    }
    // interleave flows so grouping sees pairs out of order
    let mut order: Vec<usize> = (0..rows.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let rows = order.into_iter().map(|i| rows[i].clone()).collect();
    Ok(Synthetic {
        dataset: RawDataset::new(columns, rows)?,
        node_points,
        clusters,
        labels,
    })
}

pub fn write_csv(dataset: &RawDataset, path: &std::path::Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&dataset.columns)?;
    for row in &dataset.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
