use std::collections::HashSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use qagnn::data::{group_flows, run_pipeline, ColumnRoles, FlowTable, PipelineConfig, RawDataset};
use qagnn::pca::{pca_fit, pca_transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut rot = DMatrix::<f64>::identity(n, n);
                rot[(p, p)] = c;
                rot[(q, q)] = c;
                rot[(p, q)] = s;
                rot[(q, p)] = -s;
                a = rot.transpose() * &a * &rot;
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] - mean[k]);
    centred.transpose() * &centred / (n - 1.0)
}

#[test]
fn pca_reconstruction_error_equals_discarded_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DMatrix::from_fn(20, 6, |_, _| rng.random_range(-1.0..1.0));
    let model = pca_fit(&x, 4).unwrap();
    let ev = jacobi_eigenvalues(covariance(&x));
    for (a, b) in model.explained_variance.iter().zip(&ev) {
        assert!((a - b).abs() < 1e-10);
    }
    let back = model.inverse_transform(&pca_transform(&x, &model).unwrap());
    let err = (&x - back).norm_squared() / 19.0;
    assert!((err - (ev[4] + ev[5])).abs() < 1e-8, "{err} vs {}", ev[4] + ev[5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pca_components_orthonormal_and_scores_uncorrelated(seed in any::<u64>(), n in 8usize..40, f in 4usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, f, |_, _| rng.random_range(-2.0..2.0));
        let model = pca_fit(&x, 4).unwrap();
        let w = model.component_matrix();
        prop_assert!((w.transpose() * &w - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-10);
        let cov = covariance(&pca_transform(&x, &model).unwrap());
        for i in 0..4 {
            prop_assert!((cov[(i, i)] - model.explained_variance[i]).abs() < 1e-8);
            for j in 0..4 {
                if i != j {
                    prop_assert!(cov[(i, j)].abs() < 1e-8);
                }
            }
        }
        prop_assert!(model.explained_variance.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn grouping_yields_one_row_per_pair(seed in any::<u64>(), rows in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hosts = ["a", "b", "c", "d"];
        let src: Vec<String> = (0..rows).map(|_| hosts[rng.random_range(0..4)].to_string()).collect();
        let dst: Vec<String> = (0..rows).map(|_| hosts[rng.random_range(0..4)].to_string()).collect();
        let pairs: HashSet<(String, String)> = src.iter().cloned().zip(dst.iter().cloned()).collect();
        let table = FlowTable {
            feature_names: vec!["x".into()],
            features: (0..rows).map(|_| vec![rng.random_range(0.0..1.0)]).collect(),
            src,
            dst,
            labels: (0..rows).map(|_| rng.random_range(0..2)).collect(),
        };
        prop_assert_eq!(group_flows(&table).len(), pairs.len());
    }
}

fn fixture(seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = ["src", "dst", "proto", "bytes", "pkts", "dur", "flags", "broken", "y"];
    let mut rows = Vec::new();
    for r in 0..120 {
        let attack = r % 3 == 0;
        let s = format!("10.0.0.{}", rng.random_range(0..12));
        let d = format!("10.0.1.{}", rng.random_range(0..4));
        let scale = if attack { 5.0 } else { 1.0 };
        rows.push(vec![
            s,
            d,
            ["tcp", "udp"][rng.random_range(0..2)].to_string(),
            format!("{:.3}", scale * rng.random_range(100.0..200.0)),
            format!("{:.3}", rng.random_range(1.0..50.0)),
            format!("{:.4}", rng.random_range(0.0..3.0) / scale),
            format!("{}", rng.random_range(0..8)),
            if r == 17 { String::new() } else { "1".into() },
            u8::from(attack).to_string(),
        ]);
    }
    RawDataset::new(columns.iter().map(|c| c.to_string()).collect(), rows).unwrap()
}

fn config() -> PipelineConfig {
    PipelineConfig {
        columns: ColumnRoles {
            src_ip: "src".into(),
            dst_ip: "dst".into(),
            label: "y".into(),
            ..ColumnRoles::default()
        },
        seed: 42,
        ..PipelineConfig::default()
    }
}

#[test]
fn pipeline_end_to_end_properties() {
    let raw = fixture(1);
    let out = run_pipeline(&raw, &config()).unwrap();
    let m = &out.manifest;
    assert_eq!(m.dropped_columns, vec!["broken"]);
    assert_eq!(m.feature_columns, vec!["proto", "bytes", "pkts", "dur", "flags"]);
    assert_eq!(m.categorical_mappings["proto"], vec!["tcp", "udp"]);
    let s = m.split_sizes;
    assert_eq!(s.train + s.val + s.test, m.aggregated_rows);
    assert_eq!(s.val, m.aggregated_rows * 15 / 100);
    for part in [&out.train, &out.val, &out.test] {
        assert_eq!(part.features.ncols(), 4);
        assert!(part.features.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    // post-PCA scaling is fitted on the training split, so it spans [0, 1]
    for k in 0..4 {
        let col = out.train.features.column(k);
        assert_eq!(col.min(), 0.0);
        assert_eq!(col.max(), 1.0);
    }

    let again = run_pipeline(&raw, &config()).unwrap();
    assert_eq!(out.train, again.train);
    assert_eq!(out.test, again.test);
    assert_eq!(serde_json::to_string(&out.manifest).unwrap(), serde_json::to_string(&again.manifest).unwrap());

    let unscaled = run_pipeline(
        &raw,
        &PipelineConfig {
            scale_after_pca: false,
            ..config()
        },
    )
    .unwrap();
    assert!(unscaled.train.features.iter().any(|v| *v < 0.0));
    assert!(unscaled.manifest.post_pca_scaler.is_none());
}

#[test]
fn pipeline_rejects_tiny_inputs() {
    let raw = RawDataset::new(
        ["src", "dst", "a", "y"].iter().map(|c| c.to_string()).collect(),
        vec![vec!["1".into(), "2".into(), "0.5".into(), "0".into()]],
    )
    .unwrap();
    assert!(run_pipeline(&raw, &config()).is_err());
}
