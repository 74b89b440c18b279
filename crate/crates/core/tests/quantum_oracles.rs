//! Simulator checks against brute-force dense linear algebra.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use qagnn::feature_map::{
    embed_node, embed_nodes, fidelity_gram, fourier_spectrum_probe, pauli_gram, AnsatzParams, Backend, EncoderConfig,
};
use qagnn::quantum::{expectations, param_shift_all, run_density, run_statevector, Circuit, Gate, NoiseModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single(gate: &Gate) -> [[Complex64; 2]; 2] {
    match *gate {
        Gate::Ry { angle, .. } => {
            let (s, co) = (angle / 2.0).sin_cos();
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        Gate::Rz { angle, .. } => [[c(0.0, -angle / 2.0).exp(), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, angle / 2.0).exp()]],
        Gate::Cnot { .. } => unreachable!(),
    }
}

/// Full `2^n × 2^n` matrix of one gate.
fn dense_gate(gate: &Gate, n: usize) -> CMat {
    let dim = 1 << n;
    match *gate {
        Gate::Cnot { control, target } => CMat::from_fn(dim, dim, |i, j| {
            let image = if (j >> control) & 1 == 1 { j ^ (1 << target) } else { j };
            if i == image {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }),
        _ => {
            let t = gate.target();
            let u = single(gate);
            CMat::from_fn(dim, dim, |i, j| {
                if (i & !(1 << t)) != (j & !(1 << t)) {
                    c(0.0, 0.0)
                } else {
                    u[(i >> t) & 1][(j >> t) & 1]
                }
            })
        }
    }
}

fn dense_pauli(which: char, q: usize, n: usize) -> CMat {
    let p = match which {
        'x' => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        'y' => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        _ => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    };
    let dim = 1 << n;
    CMat::from_fn(dim, dim, |i, j| {
        if (i & !(1 << q)) != (j & !(1 << q)) {
            c(0.0, 0.0)
        } else {
            p[(i >> q) & 1][(j >> q) & 1]
        }
    })
}

/// Density-matrix oracle using the Pauli-twirl form of depolarizing noise:
/// `(1 − 3p/4)ρ + (p/4)(XρX + YρY + ZρZ)` on every touched qubit.
fn oracle_expectations(circuit: &Circuit, p: f64) -> Vec<f64> {
    let n = circuit.n_qubits();
    let dim = 1 << n;
    let mut rho = CMat::zeros(dim, dim);
    rho[(0, 0)] = c(1.0, 0.0);
    for gate in circuit.gates() {
        let u = dense_gate(gate, n);
        rho = &u * &rho * u.adjoint();
        for q in gate.qubits() {
            let mut next = rho.scale(1.0 - 0.75 * p);
            for which in ['x', 'y', 'z'] {
                let s = dense_pauli(which, q, n);
                next += (&s * &rho * &s).scale(p / 4.0);
            }
            rho = next;
        }
    }
    (0..n)
        .map(|q| (dense_pauli('z', q, n) * &rho).trace().re)
        .collect()
}

fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let mut circuit = Circuit::new(n).unwrap();
    for id in 0..len {
        let t = rng.random_range(0..n);
        let angle = rng.random_range(-PI..PI);
        let gate = match rng.random_range(0..3) {
            0 => Gate::ry(t, angle).bound(id),
            1 => Gate::rz(t, angle).bound(id),
            _ if n > 1 => {
                let mut ctrl = rng.random_range(0..n);
                while ctrl == t {
                    ctrl = rng.random_range(0..n);
                }
                Gate::cnot(ctrl, t)
            }
            _ => Gate::ry(t, angle).bound(id),
        };
        circuit.push(gate).unwrap();
    }
    circuit
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulators_match_dense_oracle(seed in any::<u64>(), n in 1usize..=4, len in 0usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = random_circuit(&mut rng, n, len);
        let psi = run_statevector(&circuit);
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let exact = oracle_expectations(&circuit, 0.0);
        let sv = expectations(&circuit, None);
        let dm = expectations(&circuit, Some(&NoiseModel::noiseless()));
        for q in 0..n {
            prop_assert!((sv[q] - exact[q]).abs() < 1e-10);
            prop_assert!((dm[q] - sv[q]).abs() < 1e-10);
        }
    }

    #[test]
    fn noisy_density_matches_twirl_oracle(seed in any::<u64>(), n in 1usize..=3, len in 0usize..=20, p in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = random_circuit(&mut rng, n, len);
        let noise = NoiseModel::new(p).unwrap();
        let rho = run_density(&circuit, &noise);
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.hermiticity_error() < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-12);
        let got = rho.expect_z_all();
        for (a, b) in got.iter().zip(oracle_expectations(&circuit, p)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn parameter_shift_matches_finite_difference(seed in any::<u64>(), n in 1usize..=3, p in prop::sample::select(vec![0.0, 0.02, 0.1])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = random_circuit(&mut rng, n, 12);
        let noise = NoiseModel::new(p).unwrap();
        let h = 1e-6;
        for (pos, gate) in circuit.gates().iter().enumerate() {
            let Some(id) = gate.param() else { continue };
            let shifted = |delta: f64| {
                let mut gates = circuit.gates().to_vec();
                gates[pos] = gates[pos].with_angle(gates[pos].angle().unwrap() + delta);
                expectations(&Circuit::from_gates(n, gates).unwrap(), Some(&noise))
            };
            let (up, down) = (shifted(h), shifted(-h));
            let ps = param_shift_all(&circuit, id, Some(&noise)).unwrap();
            for q in 0..n {
                prop_assert!((ps[q] - (up[q] - down[q]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn commuting_circuit_decays_geometrically(d in 1usize..=10, p in prop::sample::select(vec![0.05, 0.1]), a in -PI..PI, n in 1usize..=3) {
        // RY(a) then d − 1 RZ rotations on qubit 0: every gate commutes with
        // the final Z measurement up to the first one, so only the channels act
        let mut circuit = Circuit::new(n).unwrap();
        circuit.push(Gate::ry(0, a)).unwrap();
        for k in 1..d {
            circuit.push(Gate::rz(0, 0.3 * k as f64)).unwrap();
        }
        let ideal = expectations(&circuit, None)[0];
        let noisy = expectations(&circuit, Some(&NoiseModel::new(p).unwrap()))[0];
        prop_assert!((noisy - (1.0 - p).powi(d as i32) * ideal).abs() < 1e-10);
    }

    #[test]
    fn embeddings_stay_in_unit_interval(seed in any::<u64>(), p in prop::sample::select(vec![0.0, 0.01, 0.05, 0.1])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = AnsatzParams::random(4, 2, PI, &mut rng);
        let backend = if p == 0.0 {
            Backend::ExactStatevector
        } else {
            Backend::ExactDensity { noise: NoiseModel::new(p).unwrap() }
        };
        let cfg = EncoderConfig::new(4, 2, backend).unwrap();
        let x = DMatrix::from_fn(8, 4, |_, _| rng.random_range(-TAU..TAU));
        let z = embed_nodes(&x, &theta, &cfg).unwrap();
        prop_assert!(z.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn encoder_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let theta = AnsatzParams::random(4, 2, PI, &mut rng);
    let x = [0.1, 0.7, 0.3, 0.9];
    for p in [0.0, 0.05] {
        let cfg = EncoderConfig::new(4, 2, Backend::ExactDensity { noise: NoiseModel::new(p).unwrap() }).unwrap();
        let circuit = qagnn::feature_map::build_circuit(&x, &theta, &cfg).unwrap();
        let z = embed_node(&x, &theta, &cfg).unwrap();
        for (a, b) in z.as_slice().iter().zip(oracle_expectations(&circuit, p)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn gram_matrices_are_valid_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let theta = AnsatzParams::random(4, 2, PI, &mut rng);
    let cfg = EncoderConfig::exact(4, 2).unwrap();
    let pts = DMatrix::from_fn(20, 4, |_, _| rng.random_range(0.0..1.0));
    let k = fidelity_gram(&pts, &theta, &cfg).unwrap();
    let pauli = pauli_gram(&pts, &theta, &cfg).unwrap();
    for i in 0..20 {
        assert!((k[(i, i)] - 1.0).abs() < 1e-12);
        for j in 0..20 {
            assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-12);
            assert!((pauli[(i, j)] - pauli[(j, i)]).abs() < 1e-12);
        }
    }
    let min = SymmetricEigen::new(k).eigenvalues.min();
    assert!(min >= -1e-10, "{min}");
    let min = SymmetricEigen::new(pauli).eigenvalues.min();
    assert!(min >= -1e-10, "{min}");
}

#[test]
fn spectrum_matches_naive_dft_and_stays_in_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cfg = EncoderConfig::exact(4, 2).unwrap();
    for _ in 0..20 {
        let theta = AnsatzParams::random(4, 2, PI, &mut rng);
        let base: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        for feature in 0..4 {
            let s = fourier_spectrum_probe(&theta, &cfg, feature, &base, 256, feature).unwrap();
            assert!(s.relative_out_of_set() < 1e-8);
            if feature == 0 {
                let samples: Vec<f64> = (0..256)
                    .map(|t| {
                        let mut x = base.clone();
                        x[feature] = TAU * t as f64 / 256.0;
                        embed_node(&x, &theta, &cfg).unwrap().as_slice()[feature]
                    })
                    .collect();
                for k in [0usize, 1, 2, 3, 255] {
                    let coeff: Complex64 = samples
                        .iter()
                        .enumerate()
                        .map(|(t, &v)| v * c(0.0, -TAU * (k * t) as f64 / 256.0).exp())
                        .sum();
                    assert!((coeff.norm() / 256.0 - s.magnitudes[k]).abs() < 1e-12);
                }
            }
        }
    }
}
