//! Exact dense simulation of few-qubit RY/RZ/CNOT circuits.
//!
//! Qubit `q` is bit `q` of the basis-state index, so qubit 0 is the least
//! significant bit. Rotations follow `RY(φ) = exp(-iφY/2)` and
//! `RZ(φ) = exp(-iφZ/2)`. Global phase is never observable through this API:
//! everything downstream consumes probabilities or expectations.

mod circuit;
mod density;
mod gradient;
mod statevector;

pub use circuit::{Circuit, Gate, NoiseModel, MAX_QUBITS};
pub use density::{run_density, DensityMatrix};
pub use gradient::{expectations, param_shift_all, param_shift_grad};
pub use statevector::{expect_z_sampled, run_statevector, Statevector};

use num_complex::Complex64;

/// Row-major 2x2 single-qubit operator.
pub(crate) type Mat2 = [[Complex64; 2]; 2];

pub(crate) fn rotation_matrix(gate: &Gate) -> Option<Mat2> {
    let zero = Complex64::new(0.0, 0.0);
    match *gate {
        Gate::Ry { angle, .. } => {
            let (s, c) = (angle / 2.0).sin_cos();
            Some([
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ])
        }
        Gate::Rz { angle, .. } => {
            let (s, c) = (angle / 2.0).sin_cos();
            Some([[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]])
        }
        Gate::Cnot { .. } => None,
    }
}

/// Sign of the Z eigenvalue of basis state `index` on `qubit`.
#[inline]
pub(crate) fn z_sign(index: usize, qubit: usize) -> f64 {
    if index >> qubit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Rounding can push a sum of probabilities a few ulps past ±1.
#[inline]
pub(crate) fn clamp_unit(value: f64) -> f64 {
    value.clamp(-1.0, 1.0)
}
