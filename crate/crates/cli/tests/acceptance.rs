//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any gated criterion fails.

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use qagnn::feature_map::{embed_nodes, fidelity_gram, fourier_spectrum_probe, pauli_gram, AnsatzParams, Backend, EncoderConfig};
use qagnn::graph::{cosine_similarity, hop_operators, FlowGraph};
use qagnn::metrics::{report, ConfusionMatrix};
use qagnn::model::{forward, ModelConfig, ModelParams, ModelVariant};
use qagnn::quantum::{expectations, run_statevector, Circuit, Gate, NoiseModel};
use qagnn::training::{loss, loss_gradients};
use qagnn_cli::commands::{cmd_ablate, cmd_generate, cmd_preprocess, cmd_train};
use qagnn_cli::synth::SynthOptions;
use qagnn_cli::RunConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String, ok: bool) -> Outcome {
    let took = start.elapsed();
    let detail = format!("{detail}; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs());
    check(ok && took <= limit, detail)
}

fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let mut c = Circuit::new(n).unwrap();
    for _ in 0..len {
        let t = rng.random_range(0..n);
        let a = rng.random_range(-PI..PI);
        let g = match rng.random_range(0..3) {
            0 => Gate::ry(t, a),
            1 => Gate::rz(t, a),
            _ if n > 1 => Gate::cnot((t + rng.random_range(1..n)) % n, t),
            _ => Gate::ry(t, a),
        };
        c.push(g).unwrap();
    }
    c
}

fn simulator_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut drift) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let len = rng.random_range(0..=40);
        let c = random_circuit(&mut rng, n, len);
        drift = drift.max((run_statevector(&c).norm_sqr() - 1.0).abs());
        let sv = expectations(&c, None);
        let dm = expectations(&c, Some(&NoiseModel::noiseless()));
        worst = sv.iter().zip(&dm).fold(worst, |w, (a, b)| w.max((a - b).abs()));
    }
    within(
        Duration::from_secs(5),
        start,
        format!("max |density - statevector| = {worst:.2e}, norm drift = {drift:.2e}"),
        worst < 1e-10 && drift < 1e-12,
    )
}

fn toy_graph(seed: u64) -> FlowGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(4, 4, |_, _| rng.random_range(0.0..1.0));
    let mut a = DMatrix::<u32>::zeros(4, 4);
    for (i, j) in [(0, 1), (1, 2), (2, 3), (0, 2)] {
        a[(i, j)] = 1;
        a[(j, i)] = 1;
    }
    FlowGraph::from_parts(x, vec![0, 1, 1, 0], (0..4).map(|i| format!("n{i}")).collect(), a).unwrap()
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let g = toy_graph(7);
    let hops = hop_operators(&g);
    let enc = EncoderConfig::exact(4, 2).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for variant in ModelVariant::ALL {
        let c = ModelConfig::new(variant, 4, 2, 8).unwrap();
        let mut p = ModelParams::init(c, &mut ChaCha8Rng::seed_from_u64(11));
        let mut flat = p.flatten();
        if let Some(r) = p.theta_range() {
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            flat[r].iter_mut().for_each(|v| *v = rng.random_range(-1.5..1.5));
            p.unflatten(&flat).unwrap();
        }
        let analytic = loss_gradients(&g, &hops, &p, &enc).map_err(|e| e.to_string())?.grad.flatten();
        let h = 1e-5;
        for t in 0..flat.len() {
            let mut q = p.clone();
            let mut w = flat.clone();
            w[t] += h;
            q.unflatten(&w).unwrap();
            let up = loss(&g, &hops, &q, &enc).unwrap();
            w[t] -= 2.0 * h;
            q.unflatten(&w).unwrap();
            let down = loss(&g, &hops, &q, &enc).unwrap();
            worst = worst.max((analytic[t] - (up - down) / (2.0 * h)).abs());
            checked += 1;
        }
    }
    within(
        Duration::from_secs(60),
        start,
        format!("{checked} parameters over 7 variants, max |analytic - FD| = {worst:.2e}"),
        worst < 1e-5,
    )
}

fn boundedness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut count = 0;
    let mut violations = 0;
    for p in [0.0, 0.01, 0.05, 0.1] {
        let backend = if p == 0.0 {
            Backend::ExactStatevector
        } else {
            Backend::ExactDensity {
                noise: NoiseModel::new(p).unwrap(),
            }
        };
        let cfg = EncoderConfig::new(4, 2, backend).unwrap();
        for _ in 0..10 {
            let theta = AnsatzParams::random(4, 2, PI, &mut rng);
            let x = DMatrix::from_fn(100, 4, |_, _| rng.random_range(-TAU..TAU));
            let z = embed_nodes(&x, &theta, &cfg).unwrap();
            count += z.nrows();
            violations += z.iter().filter(|v| !(-1.0..=1.0).contains(*v)).count();
        }
    }
    check(
        violations == 0 && count >= 1000,
        format!("{count} embeddings per noise level set, {violations} components outside [-1, 1]"),
    )
}

fn noise_decay() -> Outcome {
    let mut worst = 0.0f64;
    for p in [0.05, 0.1] {
        for d in 1..=10 {
            let mut c = Circuit::new(2).unwrap();
            c.push(Gate::ry(0, 0.7)).unwrap();
            for k in 1..d {
                c.push(Gate::rz(0, 0.2 * k as f64)).unwrap();
            }
            let ideal = expectations(&c, None)[0];
            let noisy = expectations(&c, Some(&NoiseModel::new(p).unwrap()))[0];
            worst = worst.max((noisy - (1.0 - p).powi(d as i32) * ideal).abs());
        }
    }
    check(worst < 1e-10, format!("max |<Z>_noisy - (1-p)^d <Z>_ideal| = {worst:.2e} for d <= 10"))
}

fn fourier_containment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = EncoderConfig::exact(4, 2).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta = AnsatzParams::random(4, 2, PI, &mut rng);
        let base: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        for feature in 0..4 {
            for qubit in 0..4 {
                let s = fourier_spectrum_probe(&theta, &cfg, feature, &base, 256, qubit).unwrap();
                worst = worst.max(s.relative_out_of_set());
            }
        }
    }
    check(worst < 1e-8, format!("max relative energy outside {{0, ±1, ±2}} = {worst:.2e}"))
}

fn kernel_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = EncoderConfig::exact(4, 2).unwrap();
    let theta = AnsatzParams::random(4, 2, PI, &mut rng);
    let pts = DMatrix::from_fn(20, 4, |_, _| rng.random_range(0.0..1.0));
    let k = fidelity_gram(&pts, &theta, &cfg).unwrap();
    let pk = pauli_gram(&pts, &theta, &cfg).unwrap();
    let asym = (&k - k.transpose()).abs().max().max((&pk - pk.transpose()).abs().max());
    let diag = (0..20).map(|i| (k[(i, i)] - 1.0).abs()).fold(0.0, f64::max);
    let min_eig = SymmetricEigen::new(k).eigenvalues.min();
    check(
        min_eig >= -1e-10 && diag < 1e-12 && asym < 1e-12,
        format!("min eigenvalue {min_eig:.2e}, max |diag - 1| {diag:.2e}, max asymmetry {asym:.2e}"),
    )
}

fn metrics_pinning() -> Outcome {
    let r = report(&ConfusionMatrix {
        tp: 3,
        fn_: 2,
        tn: 19,
        fp: 0,
    });
    let got = r.row().map(|v| (v * 1e4).round() / 1e4);
    let want = [0.9167, 0.9524, 0.8, 0.85, 0.0, 0.4, 1.0];
    check(got == want, format!("row {got:?}"))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let opts = SynthOptions {
        seed: 2024,
        ..SynthOptions::default()
    };
    let flows = dir.path().join("flows.csv");
    let data = cmd_generate(&opts, &flows).map_err(|e| e.to_string())?;
    let (mut inter, mut intra) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..data.node_points.len() {
        for j in i + 1..data.node_points.len() {
            let c = cosine_similarity(&data.node_points[i], &data.node_points[j]).unwrap();
            if data.clusters[i] == data.clusters[j] {
                intra = intra.min(c);
            } else {
                inter = inter.max(c);
            }
        }
    }
    let mut cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cfg.data.input = Some(flows);
    cfg.data.pipeline.seed = 7;
    cfg.train.seed = 7;
    cfg.train.max_epochs = 200;
    cmd_preprocess(&cfg).map_err(|e| format!("{e:#}"))?;
    let out = cmd_train(&cfg).map_err(|e| format!("{e:#}"))?;
    let m = &out.test_metrics;
    let trained = format!(
        "{} nodes, F=4, max inter-cluster cos {inter:.3}, min intra-cluster cos {intra:.3}; \
         test macro-F1 {:.4}, FPR {:.4} after {} epochs",
        data.node_points.len(),
        m.f1,
        m.fpr,
        out.report.epochs_run()
    );
    let mut ablation_cfg = cfg.clone();
    ablation_cfg.output_dir = dir.path().join("ablation");
    ablation_cfg.data.splits_dir = Some(dir.path().to_path_buf());
    let results = cmd_ablate(&ablation_cfg).map_err(|e| format!("{e:#}"))?;
    let node_wise = &results.iter().find(|(v, _)| *v == ModelVariant::NodeWiseQnn).unwrap().1;
    let defined = node_wise.row().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v));
    within(
        Duration::from_secs(600),
        start,
        format!("{trained}; node-wise ablation F1 {:.4}", node_wise.f1),
        data.node_points.len() == 150
            && inter < 0.5
            && intra > 0.95
            && m.f1 >= 0.95
            && m.fpr <= 0.05
            && out.report.epochs_run() <= 200
            && defined,
    )
}

fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> FlowGraph {
    let x = DMatrix::from_fn(n, 4, |_, _| rng.random_range(0.0..1.0));
    let mut a = DMatrix::<u32>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.35) {
                a[(i, j)] = 1;
                a[(j, i)] = 1;
            }
        }
    }
    let labels = (0..n).map(|_| rng.random_range(0..2)).collect();
    FlowGraph::from_parts(x, labels, (0..n).map(|i| format!("n{i}")).collect(), a).unwrap()
}

fn permutation_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let enc = EncoderConfig::exact(4, 2).unwrap();
    let (mut worst_perm, mut worst_sorted) = (0.0f64, 0.0f64);
    for trial in 0..20 {
        let n = rng.random_range(3..12);
        let g = random_graph(n, &mut rng);
        let variant = ModelVariant::ALL[trial % 7];
        let p = ModelParams::init(ModelConfig::new(variant, 4, 2, 8).unwrap(), &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let pg = g.permuted(&perm).unwrap();
        let base = forward(&g, &hop_operators(&g), &p, &enc).unwrap();
        let moved = forward(&pg, &hop_operators(&pg), &p, &enc).unwrap();
        for i in 0..n {
            worst_perm = worst_perm.max((moved[i] - base[perm[i]]).abs());
        }
        let (mut a, mut b) = (base.clone(), moved.clone());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        worst_sorted = a.iter().zip(&b).fold(worst_sorted, |w, (x, y)| w.max((x - y).abs()));
    }
    check(
        worst_perm < 1e-10 && worst_sorted < 1e-10,
        format!("20 permutations: max sorted-multiset gap {worst_sorted:.2e}, max permuted-logit gap {worst_perm:.2e}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let flows = dir.path().join("flows.csv");
    cmd_generate(
        &SynthOptions {
            nodes: 60,
            seed: 4,
            ..SynthOptions::default()
        },
        &flows,
    )
    .map_err(|e| e.to_string())?;
    let mut curves = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = RunConfig {
            output_dir: dir.path().join(run),
            ..RunConfig::default()
        };
        cfg.data.input = Some(flows.clone());
        cfg.train.max_epochs = 25;
        cmd_preprocess(&cfg).map_err(|e| format!("{e:#}"))?;
        cmd_train(&cfg).map_err(|e| format!("{e:#}"))?;
        curves.push(std::fs::read(cfg.output_dir.join("loss_curve.csv")).map_err(|e| e.to_string())?);
    }
    check(
        curves[0] == curves[1] && !curves[0].is_empty(),
        format!("two seeded training runs, loss_curve.csv {} bytes each, identical: {}", curves[0].len(), curves[0] == curves[1]),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("simulator exactness", simulator_exactness),
        ("gradient correctness", gradient_correctness),
        ("embedding boundedness", boundedness),
        ("depolarizing decay", noise_decay),
        ("Fourier containment", fourier_containment),
        ("kernel properties", kernel_properties),
        ("metrics pinning", metrics_pinning),
        ("end-to-end synthetic run", end_to_end),
        ("permutation equivariance", permutation_equivariance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "criterion 11 SKIP  dataset reproduction: needs user-supplied benchmark CSVs; \
         run `qagnn threshold-sweep` on them (procedure in README)"
    );
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all gated acceptance criteria passed");
}
