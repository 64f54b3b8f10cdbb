//! Exact statevector simulation of the hybrid model's variational circuit.
//!
//! The circuit acting on `n` qubits is
//!
//! 1. `RX(φ_i)` on qubit `i` (angle encoding of the first `n` features),
//! 2. `L` strongly entangling layers, each `Rot(α,β,γ) = RZ(γ)·RY(β)·RZ(α)`
//!    on every qubit followed by a round of CNOTs chosen by
//!    [`Connectivity`],
//! 3. measurement of `⟨Z_i⟩` on every qubit.
//!
//! Qubit 0 is the least significant bit of a basis index and rotations
//! follow `R_P(φ) = exp(−iφP/2)`.

mod circuit;
mod gates;
mod gradient;
mod layer;
mod state;

pub use circuit::{
    angle_encode, circuit_forward, entangling_layers, expect_z, Circuit, Connectivity,
    ParamSlot, QuantumLayerParams,
};
pub use gates::{Gate, Pauli};
pub use gradient::{circuit_gradient, finite_difference_gradient, CircuitGrad, GradMethod};
pub use layer::QuantumLayer;
pub use state::{StateVector, MAX_QUBITS};
