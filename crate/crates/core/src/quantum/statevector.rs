use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{clamp_unit, rotation_matrix, z_sign, Circuit, Gate, Mat2};
use crate::error::{Error, Result};

/// Pure state of `n_qubits` qubits as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} outside a {dim}-dimensional space"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {dim} is not a power of two ≥ 2"
            )));
        }
        let norm: f64 = amps.iter().map(Complex64::norm_sqr).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::DimensionMismatch {
                context: "statevector overlap",
                expected: self.amps.len(),
                got: other.amps.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Applies a gate that has already been validated against this register.
    pub(crate) fn apply(&mut self, gate: &Gate) {
        match (*gate, rotation_matrix(gate)) {
            (Gate::Cnot { control, target }, _) => self.apply_cnot(control, target),
            (g, Some(m)) => self.apply_single(g.target(), &m),
            _ => unreachable!("rotation gates always have a matrix"),
        }
    }

    fn apply_single(&mut self, qubit: usize, m: &Mat2) {
        let stride = 1usize << qubit;
        for base in (0..self.amps.len()).step_by(stride << 1) {
            for i0 in base..base + stride {
                let i1 = i0 + stride;
                let (a0, a1) = (self.amps[i0], self.amps[i1]);
                self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cbit, tbit) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            // visit each swapped pair once, from its target-bit-clear member
            if i & cbit != 0 && i & tbit == 0 {
                self.amps.swap(i, i | tbit);
            }
        }
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Probability of reading `1` on `qubit`.
    pub fn probability_one(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i >> qubit & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// `⟨Z_qubit⟩ = Σ_b ±|a_b|²`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(clamp_unit(self.expect_z_unchecked(qubit)))
    }

    pub(crate) fn expect_z_unchecked(&self, qubit: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| z_sign(i, qubit) * a.norm_sqr())
            .sum()
    }

    /// `⟨Z_q⟩` for every qubit, in qubit order.
    pub fn expect_z_all(&self) -> Vec<f64> {
        (0..self.n_qubits)
            .map(|q| clamp_unit(self.expect_z_unchecked(q)))
            .collect()
    }
}

/// Runs `circuit` from `|0…0⟩`.
pub fn run_statevector(circuit: &Circuit) -> Statevector {
    let mut state = Statevector::zero(circuit.n_qubits());
    for gate in circuit.gates() {
        state.apply(gate);
    }
    state
}

/// Shot-based estimate of `⟨Z_qubit⟩`: the mean of `shots` ±1 outcomes drawn
/// from the Born distribution. The single-qubit marginal is Bernoulli, so the
/// number of `1` outcomes is drawn as one binomial variate.
pub fn expect_z_sampled(state: &Statevector, qubit: usize, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be at least 1".into()));
    }
    let p_one = state.probability_one(qubit)?.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ones = Binomial::new(shots, p_one)
        .map_err(|e| Error::InvalidArgument(format!("binomial sampler: {e}")))?
        .sample(&mut rng);
    Ok((shots as f64 - 2.0 * ones as f64) / shots as f64)
}
