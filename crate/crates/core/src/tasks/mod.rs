//! Benchmarks and data: encoders, MNIST ingestion, synthetic datasets, QML
//! readout/loss, Pauli Hamiltonians and VQE objectives.

mod data;
mod encoder;
mod hamiltonian;
mod mnist;
mod qml;
mod vqe;

pub use data::{synthetic_dataset, DataBundle, Dataset, Split};
pub use encoder::EncoderSpec;
pub use hamiltonian::{exact_ground_energy, load_hamiltonian, Hamiltonian, MAX_DIAG_QUBITS};
pub use mnist::{
    build_mnist_task, load_mnist_idx, parse_idx_images, parse_idx_labels, preprocess,
    standardize_bundle, RawMnist,
};
pub use qml::{
    argmax, noisy_z_expectations, qml_logits, qml_readout_density, qml_readout_state, softmax,
    QmlLoss, QmlTask, READOUT_QUBITS,
};
pub use vqe::{
    hardware_ansatz, vqe_energy_of_dm, vqe_expectation, vqe_expectation_noisy, VqeLoss, VqeTask,
};

/// The two benchmark families.
#[derive(Debug, Clone)]
pub enum Task {
    Qml(QmlTask),
    Vqe(VqeTask),
}

impl Task {
    pub fn n_qubits(&self) -> usize {
        match self {
            Task::Qml(t) => t.n_qubits,
            Task::Vqe(t) => t.hamiltonian.n_qubits,
        }
    }
}
