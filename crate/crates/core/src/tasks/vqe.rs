//! VQE objectives: Hamiltonian expectations on pure and noisy backends.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::grad::Loss;
use crate::noise::{apply_readout_error, dm_run, DensityMatrix, DeviceModel};
use crate::qcompile::CompiledCircuit;
use crate::qstate::{expectation, run_circuit, Circuit, Gate, GateKind, Pauli, RunMode};
use crate::tasks::hamiltonian::Hamiltonian;

/// `Σ_k c_k ⟨P_k⟩` on the noise-free statevector backend.
pub fn vqe_expectation(circuit: &Circuit, params: &[f64], h: &Hamiltonian) -> Result<f64> {
    if circuit.n_qubits < h.n_qubits {
        return Err(Error::Validation(format!(
            "hamiltonian acts on {} qubits but circuit has {}",
            h.n_qubits, circuit.n_qubits
        )));
    }
    let state = run_circuit(circuit, params, RunMode::default())?;
    Ok(h.terms.iter().map(|t| expectation(&state, t)).sum())
}

/// Hamiltonian expectation of a compiled circuit on the noisy backend,
/// mirroring the hardware procedure per term: basis-rotate onto Z, read the
/// diagonal through the readout confusion, and sum the signed outcomes.
pub fn vqe_expectation_noisy(
    compiled: &CompiledCircuit,
    device: &DeviceModel,
    h: &Hamiltonian,
) -> Result<f64> {
    let rho = dm_run(&compiled.circuit, device)?;
    vqe_energy_of_dm(&rho, device, h, &compiled.final_layout)
}

/// Energy of an already-simulated state; `layout` maps logical qubits to
/// physical wires.
pub fn vqe_energy_of_dm(
    rho: &DensityMatrix,
    device: &DeviceModel,
    h: &Hamiltonian,
    layout: &[usize],
) -> Result<f64> {
    let mut energy = 0.0;
    for term in &h.terms {
        if term.ops.is_empty() {
            energy += term.coefficient;
            continue;
        }
        let mut rotated = rho.clone();
        let mut wires = Vec::new();
        for (&q, &p) in &term.ops {
            let w = layout[q];
            wires.push(w);
            match p {
                Pauli::X => {
                    let hgate = crate::qstate::gate_unitary(GateKind::H, &[])?;
                    rotated.apply_unitary(&hgate, &[w]);
                }
                Pauli::Y => {
                    // S† then H maps Y-basis onto Z-basis
                    let sdg = crate::qstate::gate_unitary(GateKind::RZ, &[-std::f64::consts::FRAC_PI_2])?;
                    let hgate = crate::qstate::gate_unitary(GateKind::H, &[])?;
                    rotated.apply_unitary(&sdg, &[w]);
                    rotated.apply_unitary(&hgate, &[w]);
                }
                Pauli::Z => {}
            }
        }
        let marginal = rotated.marginal_probs(&wires);
        let noisy = apply_readout_error(&marginal, device, &wires);
        let mut ev = 0.0;
        for (idx, p) in noisy.iter().enumerate() {
            let sign = if (idx.count_ones() & 1) == 1 { -1.0 } else { 1.0 };
            ev += sign * p;
        }
        energy += term.coefficient * ev;
    }
    Ok(energy)
}

/// A VQE task over one Hamiltonian.
#[derive(Debug, Clone)]
pub struct VqeTask {
    pub hamiltonian: Hamiltonian,
}

impl VqeTask {
    pub fn loss(&self) -> VqeLoss<'_> {
        VqeLoss { h: &self.hamiltonian }
    }
}

/// The Hamiltonian expectation as a trainable loss (single "sample").
pub struct VqeLoss<'a> {
    pub h: &'a Hamiltonian,
}

impl Loss for VqeLoss<'_> {
    fn n_samples(&self) -> usize {
        1
    }

    fn prepare<'a>(&self, ansatz: &'a Circuit, _sample: usize) -> Result<Cow<'a, Circuit>> {
        Ok(Cow::Borrowed(ansatz))
    }

    fn expectations(&self, prepared: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
        let state = run_circuit(prepared, params, RunMode::default())?;
        Ok(self.h.terms.iter().map(|t| expectation(&state, t)).collect())
    }

    fn loss_from(&self, evs: &[f64], _sample: usize) -> f64 {
        evs.iter().sum()
    }

    fn dloss_dev(&self, evs: &[f64], _sample: usize) -> Vec<f64> {
        vec![1.0; evs.len()]
    }
}

/// Bell-pair style demonstration ansatz used in tests: RY on each qubit,
/// entangler ring, RY on each qubit.
pub fn hardware_ansatz(n_qubits: usize, blocks: usize) -> Circuit {
    let mut circuit = Circuit::new(n_qubits);
    let mut slot = 0;
    for _ in 0..blocks {
        for q in 0..n_qubits {
            circuit
                .push(Gate::new(GateKind::RY, vec![q], vec![crate::qstate::Param::Slot(slot)]).unwrap())
                .unwrap();
            slot += 1;
        }
        if n_qubits > 1 {
            for q in 0..n_qubits {
                circuit.push_fixed(GateKind::CNOT, vec![q, (q + 1) % n_qubits], &[]).unwrap();
            }
        }
    }
    circuit
}
