use std::f64::consts::FRAC_PI_2;

use super::{run_density, run_statevector, Circuit, NoiseModel};
use crate::error::{Error, Result};

/// `⟨Z_q⟩` for every qubit after running `circuit`, exactly: statevector when
/// `noise` is `None`, density matrix otherwise.
pub fn expectations(circuit: &Circuit, noise: Option<&NoiseModel>) -> Vec<f64> {
    match noise {
        None => run_statevector(circuit).expect_z_all(),
        Some(model) => run_density(circuit, model).expect_z_all(),
    }
}

/// Parameter-shift derivative of every `⟨Z_q⟩` with respect to parameter slot
/// `param_id`. Both RY and RZ have generators with eigenvalues ±1/2, so the
/// two-term rule with shift π/2 is exact, with or without depolarizing noise.
pub fn param_shift_all(
    circuit: &Circuit,
    param_id: usize,
    noise: Option<&NoiseModel>,
) -> Result<Vec<f64>> {
    let position = circuit.param_position(param_id)?;
    let plus = expectations(&circuit.shifted(position, FRAC_PI_2), noise);
    let minus = expectations(&circuit.shifted(position, -FRAC_PI_2), noise);
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / 2.0).collect())
}

/// `∂⟨Z_qubit⟩/∂θ_param_id` by the parameter-shift rule.
pub fn param_shift_grad(
    circuit: &Circuit,
    param_id: usize,
    qubit: usize,
    noise: Option<&NoiseModel>,
) -> Result<f64> {
    if qubit >= circuit.n_qubits() {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            n_qubits: circuit.n_qubits(),
        });
    }
    Ok(param_shift_all(circuit, param_id, noise)?[qubit])
}
