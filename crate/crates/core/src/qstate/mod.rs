//! Noise-free statevector simulation: gate set, circuits, state evolution,
//! Pauli expectations and shot sampling.

mod circuit;
mod gate;
mod state;

pub use circuit::{random_circuit, Circuit};
pub use gate::{gate_unitary, Gate, GateKind, Param, ALL_KINDS};
pub use state::{
    apply_gate, expectation, format_bitstring, new_zero_state, run_circuit, sample_counts, Pauli,
    PauliString, RunMode, Statevector, MAX_STATEVECTOR_QUBITS,
};

pub(crate) use state::kernel;
