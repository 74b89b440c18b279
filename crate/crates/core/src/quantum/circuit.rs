use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense simulators accept.
pub const MAX_QUBITS: usize = 10;

/// A single gate of the supported set.
///
/// Rotations may carry a `param` slot tying their angle to a trainable
/// parameter; CNOTs never do.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Gate {
    Ry {
        target: usize,
        angle: f64,
        param: Option<usize>,
    },
    Rz {
        target: usize,
        angle: f64,
        param: Option<usize>,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn ry(target: usize, angle: f64) -> Self {
        Gate::Ry {
            target,
            angle,
            param: None,
        }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Gate::Rz {
            target,
            angle,
            param: None,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// Binds a rotation to parameter slot `id`. CNOTs are returned unchanged.
    pub fn bound(self, id: usize) -> Self {
        match self {
            Gate::Ry { target, angle, .. } => Gate::Ry {
                target,
                angle,
                param: Some(id),
            },
            Gate::Rz { target, angle, .. } => Gate::Rz {
                target,
                angle,
                param: Some(id),
            },
            cnot => cnot,
        }
    }

    pub fn param(&self) -> Option<usize> {
        match *self {
            Gate::Ry { param, .. } | Gate::Rz { param, .. } => param,
            Gate::Cnot { .. } => None,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => Some(angle),
            Gate::Cnot { .. } => None,
        }
    }

    pub fn with_angle(self, new_angle: f64) -> Self {
        match self {
            Gate::Ry { target, param, .. } => Gate::Ry {
                target,
                angle: new_angle,
                param,
            },
            Gate::Rz { target, param, .. } => Gate::Rz {
                target,
                angle: new_angle,
                param,
            },
            cnot => cnot,
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::Ry { target, .. } | Gate::Rz { target, .. } | Gate::Cnot { target, .. } => target,
        }
    }

    /// Qubits the gate acts on, control first for a CNOT.
    pub fn qubits(&self) -> impl Iterator<Item = usize> {
        let (first, second) = match *self {
            Gate::Ry { target, .. } | Gate::Rz { target, .. } => (target, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        };
        std::iter::once(first).chain(second)
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        match *self {
            Gate::Cnot { control, target } if control == target => Err(Error::InvalidGate(
                format!("CNOT control and target are both qubit {target}"),
            )),
            Gate::Ry { angle, .. } | Gate::Rz { angle, .. } if !angle.is_finite() => {
                Err(Error::InvalidGate(format!("non-finite rotation angle {angle}")))
            }
            _ => Ok(()),
        }
    }
}

/// An ordered gate list over a fixed register, applied left to right.
///
/// Construction validates every gate, so a `Circuit` value is always
/// structurally sound.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "register size {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut circuit = Self::new(n_qubits)?;
        circuit.gates.reserve(gates.len());
        for gate in gates {
            circuit.push(gate)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Number of distinct parameter slots referenced by the circuit.
    pub fn bound_params(&self) -> usize {
        let mut ids: Vec<usize> = self.gates.iter().filter_map(Gate::param).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Position of the unique gate bound to `id`.
    pub fn param_position(&self, id: usize) -> Result<usize> {
        let mut found = self
            .gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.param() == Some(id))
            .map(|(i, _)| i);
        match (found.next(), found.next()) {
            (Some(pos), None) => Ok(pos),
            (None, _) => Err(Error::InvalidArgument(format!(
                "parameter {id} is not bound to any gate"
            ))),
            (Some(_), Some(_)) => Err(Error::InvalidArgument(format!(
                "parameter {id} is bound to more than one gate"
            ))),
        }
    }

    /// Copy of the circuit with the rotation at `position` shifted by `delta`.
    pub(crate) fn shifted(&self, position: usize, delta: f64) -> Circuit {
        let mut out = self.clone();
        let gate = out.gates[position];
        let angle = gate.angle().expect("shifted gate is a rotation");
        out.gates[position] = gate.with_angle(angle + delta);
        out
    }
}

/// Single-qubit depolarizing noise applied after every gate to each qubit the
/// gate touches: `E(ρ) = (1 − p)ρ + p·Tr_q(ρ) ⊗ I/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    depolarizing_p: f64,
}

impl NoiseModel {
    pub fn new(depolarizing_p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&depolarizing_p) {
            return Err(Error::InvalidArgument(format!(
                "depolarizing probability {depolarizing_p} outside [0, 1)"
            )));
        }
        Ok(Self { depolarizing_p })
    }

    pub fn noiseless() -> Self {
        Self { depolarizing_p: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.depolarizing_p
    }
}
