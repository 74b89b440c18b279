use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{clamp_unit, rotation_matrix, z_sign, Circuit, Gate, Mat2, NoiseModel, Statevector};
use crate::error::{Error, Result};

/// Mixed state as a dense row-major `2^n × 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        Self { n_qubits, dim, data }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_statevector(state: &Statevector) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in amps {
            for c in amps {
                data.push(r * c.conj());
            }
        }
        Self {
            n_qubits: state.n_qubits(),
            dim,
            data,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    /// Largest `|ρ_rc − conj(ρ_cr)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_fn(self.dim, self.dim, |r, c| {
            (self.entry(r, c) + self.entry(c, r).conj()) * 0.5
        });
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn apply(&mut self, gate: &Gate) {
        match (*gate, rotation_matrix(gate)) {
            (Gate::Cnot { control, target }, _) => self.apply_cnot(control, target),
            (g, Some(m)) => self.conjugate_single(g.target(), &m),
            _ => unreachable!("rotation gates always have a matrix"),
        }
    }

    /// `ρ ← UρU†` for a single-qubit `U`.
    fn conjugate_single(&mut self, qubit: usize, m: &Mat2) {
        let dim = self.dim;
        let stride = 1usize << qubit;
        // left multiply: U acts on the row index of every column
        for c in 0..dim {
            for base in (0..dim).step_by(stride << 1) {
                for r0 in base..base + stride {
                    let (i0, i1) = (r0 * dim + c, (r0 + stride) * dim + c);
                    let (a0, a1) = (self.data[i0], self.data[i1]);
                    self.data[i0] = m[0][0] * a0 + m[0][1] * a1;
                    self.data[i1] = m[1][0] * a0 + m[1][1] * a1;
                }
            }
        }
        // right multiply by U†: conj(U) acts on the column index of every row
        for r in 0..dim {
            let row = &mut self.data[r * dim..(r + 1) * dim];
            for base in (0..dim).step_by(stride << 1) {
                for c0 in base..base + stride {
                    let (a0, a1) = (row[c0], row[c0 + stride]);
                    row[c0] = a0 * m[0][0].conj() + a1 * m[0][1].conj();
                    row[c0 + stride] = a0 * m[1][0].conj() + a1 * m[1][1].conj();
                }
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cbit, tbit) = (1usize << control, 1usize << target);
        let perm = |i: usize| if i & cbit != 0 { i ^ tbit } else { i };
        let dim = self.dim;
        let old = self.data.clone();
        for r in 0..dim {
            let pr = perm(r);
            for c in 0..dim {
                self.data[r * dim + c] = old[pr * dim + perm(c)];
            }
        }
    }

    /// Single-qubit depolarizing channel on `qubit`.
    pub(crate) fn depolarize(&mut self, qubit: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let dim = self.dim;
        let bit = 1usize << qubit;
        let old = self.data.clone();
        for r in 0..dim {
            for c in 0..dim {
                let idx = r * dim + c;
                let mut value = old[idx] * (1.0 - p);
                if (r ^ c) & bit == 0 {
                    // (Tr_q ρ ⊗ I/2) only has support where both indices share the qubit value
                    let (r0, c0) = (r & !bit, c & !bit);
                    let traced = old[r0 * dim + c0] + old[(r0 | bit) * dim + (c0 | bit)];
                    value += traced * (p / 2.0);
                }
                self.data[idx] = value;
            }
        }
    }

    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(clamp_unit(self.expect_z_unchecked(qubit)))
    }

    fn expect_z_unchecked(&self, qubit: usize) -> f64 {
        (0..self.dim)
            .map(|i| z_sign(i, qubit) * self.entry(i, i).re)
            .sum()
    }

    pub fn expect_z_all(&self) -> Vec<f64> {
        (0..self.n_qubits)
            .map(|q| clamp_unit(self.expect_z_unchecked(q)))
            .collect()
    }
}

/// Runs `circuit` from `|0…0⟩⟨0…0|`, following each gate with the
/// depolarizing channel on every qubit it touched.
pub fn run_density(circuit: &Circuit, noise: &NoiseModel) -> DensityMatrix {
    let mut rho = DensityMatrix::zero(circuit.n_qubits());
    let p = noise.p();
    for gate in circuit.gates() {
        rho.apply(gate);
        for q in gate.qubits() {
            rho.depolarize(q, p);
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::run_statevector;
    use std::f64::consts::PI;

    fn noise(p: f64) -> NoiseModel {
        NoiseModel::new(p).unwrap()
    }

    #[test]
    fn single_channel_scales_z() {
        let c = Circuit::from_gates(1, vec![Gate::ry(0, PI)]).unwrap();
        let z = run_density(&c, &noise(0.1)).expect_z(0).unwrap();
        assert!((z + 0.9).abs() < 1e-12, "{z}");
    }

    #[test]
    fn three_gates_give_cubed_factor() {
        let c = Circuit::from_gates(1, vec![Gate::ry(0, PI), Gate::rz(0, 0.0), Gate::rz(0, 0.0)])
            .unwrap();
        let z = run_density(&c, &noise(0.1)).expect_z(0).unwrap();
        assert!((z + 0.729).abs() < 1e-12, "{z}");
    }

    #[test]
    fn noiseless_matches_outer_product() {
        let c = Circuit::from_gates(
            3,
            vec![
                Gate::ry(0, 0.7),
                Gate::rz(0, 1.3),
                Gate::cnot(0, 2),
                Gate::ry(1, -0.4),
                Gate::cnot(2, 1),
                Gate::rz(2, 0.25),
            ],
        )
        .unwrap();
        let rho = run_density(&c, &NoiseModel::noiseless());
        let pure = DensityMatrix::from_statevector(&run_statevector(&c));
        for r in 0..rho.dim() {
            for col in 0..rho.dim() {
                assert!((rho.entry(r, col) - pure.entry(r, col)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noisy_state_stays_physical() {
        let c = Circuit::from_gates(
            2,
            vec![Gate::ry(0, 1.0), Gate::cnot(0, 1), Gate::rz(1, 0.3), Gate::ry(1, 2.0)],
        )
        .unwrap();
        let rho = run_density(&c, &noise(0.2));
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(rho.trace().im.abs() < 1e-12);
        assert!(rho.hermiticity_error() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn cnot_incurs_two_channels() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1)]).unwrap();
        let rho = run_density(&c, &noise(0.1));
        // |00⟩ is a fixed point of CNOT; each qubit sees one channel.
        assert!((rho.expect_z(0).unwrap() - 0.9).abs() < 1e-12);
        assert!((rho.expect_z(1).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn strong_noise_drives_towards_maximally_mixed() {
        let mut gates = vec![Gate::ry(0, PI)];
        gates.extend((0..200).map(|_| Gate::rz(0, 0.0)));
        let c = Circuit::from_gates(1, gates).unwrap();
        let rho = run_density(&c, &noise(0.5));
        assert!(rho.expect_z(0).unwrap().abs() < 1e-12);
        assert!((rho.entry(0, 0).re - 0.5).abs() < 1e-12);
    }
}
