//! Hybrid quantum-classical attentive graph neural network for flow-level
//! intrusion detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantum`] exact few-qubit simulation (statevector and density matrix
//!   with depolarizing noise), Pauli-Z expectations and parameter-shift
//!   gradients.
//! * [`feature_map`] the angle-encoding + EfficientSU2 encoder, node
//!   embeddings, Pauli/fidelity kernels and a Fourier spectrum probe.
//! * [`graph`] cosine-similarity flow graphs and their hop operators.
//! * [`model`] the forward pass with global node-level attention and the
//!   ablation variants.
//! * [`training`] BCE loss, analytic + parameter-shift gradients, Adam and
//!   early stopping.
//! * [`data`] CSV ingestion, flow aggregation, scaling, PCA and splitting.
//! * [`metrics`] confusion-matrix based evaluation.

pub mod data;
pub mod error;
pub mod feature_map;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod pca;
pub mod quantum;
pub mod training;

pub use error::{Error, Result};
