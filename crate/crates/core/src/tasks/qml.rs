//! QML readout and the softmax-NLL classification loss.
//!
//! Readout measures ⟨Z⟩ on qubits 0–3. Two classes sum qubits (0,1) and
//! (2,3) into two logits; four classes use the four expectations directly.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::grad::Loss;
use crate::noise::{apply_readout_error, DensityMatrix, DeviceModel};
use crate::qstate::{expectation, run_circuit, Circuit, PauliString, RunMode, Statevector};
use crate::tasks::data::{DataBundle, Dataset, Split};
use crate::tasks::encoder::EncoderSpec;

pub const READOUT_QUBITS: usize = 4;

/// Class logits from per-qubit ⟨Z⟩ values.
pub fn qml_logits(zs: &[f64], n_classes: usize) -> Result<Vec<f64>> {
    if zs.len() < READOUT_QUBITS {
        return Err(Error::Validation(format!(
            "readout needs {READOUT_QUBITS} measured qubits, got {}",
            zs.len()
        )));
    }
    match n_classes {
        2 => Ok(vec![zs[0] + zs[1], zs[2] + zs[3]]),
        4 => Ok(zs[..4].to_vec()),
        other => Err(Error::Validation(format!("readout supports 2 or 4 classes, got {other}"))),
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::MIN, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn nll(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::MIN, f64::max);
    let logsumexp = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logsumexp - logits[label]
}

fn z_expectations_state(state: &Statevector) -> Vec<f64> {
    (0..READOUT_QUBITS).map(|q| expectation(state, &PauliString::z(q))).collect()
}

/// Class probabilities from a pure state.
pub fn qml_readout_state(state: &Statevector, n_classes: usize) -> Result<Vec<f64>> {
    Ok(softmax(&qml_logits(&z_expectations_state(state), n_classes)?))
}

/// Class probabilities from a density matrix with the device's readout
/// confusion applied to the measured-qubit distribution first. `wires` are
/// the physical wires carrying logical qubits 0–3.
pub fn qml_readout_density(
    rho: &DensityMatrix,
    device: &DeviceModel,
    wires: &[usize],
    n_classes: usize,
) -> Result<Vec<f64>> {
    let zs = noisy_z_expectations(rho, device, wires)?;
    Ok(softmax(&qml_logits(&zs, n_classes)?))
}

pub fn noisy_z_expectations(
    rho: &DensityMatrix,
    device: &DeviceModel,
    wires: &[usize],
) -> Result<Vec<f64>> {
    if wires.len() < READOUT_QUBITS {
        return Err(Error::Validation("need four measured wires".into()));
    }
    let marginal = rho.marginal_probs(wires);
    let noisy = apply_readout_error(&marginal, device, wires);
    let mut zs = vec![0.0; wires.len()];
    for (idx, p) in noisy.iter().enumerate() {
        for (j, z) in zs.iter_mut().enumerate() {
            *z += p * if (idx >> j) & 1 == 1 { -1.0 } else { 1.0 };
        }
    }
    Ok(zs)
}

/// A classification task over a data bundle.
#[derive(Debug, Clone)]
pub struct QmlTask {
    pub encoder: EncoderSpec,
    pub n_classes: usize,
    pub n_qubits: usize,
    pub data: DataBundle,
}

impl QmlTask {
    pub fn new(encoder: EncoderSpec, n_classes: usize, n_qubits: usize, data: DataBundle) -> Result<Self> {
        if n_qubits < READOUT_QUBITS {
            return Err(Error::Validation(format!(
                "QML tasks need at least {READOUT_QUBITS} qubits for readout"
            )));
        }
        if encoder.n_qubits() > n_qubits {
            return Err(Error::Validation("encoder touches more qubits than the task has".into()));
        }
        Ok(QmlTask { encoder, n_classes, n_qubits, data })
    }

    pub fn loss(&self, split: Split) -> QmlLoss<'_> {
        QmlLoss { encoder: &self.encoder, n_classes: self.n_classes, data: self.data.split(split) }
    }

    /// Full circuit for one sample: encoder rotations then ansatz gates.
    pub fn prepared_circuit(&self, ansatz: &Circuit, features: &[f64]) -> Result<Circuit> {
        prepare_circuit(&self.encoder, ansatz, features)
    }

    /// Noise-free accuracy over a split (argmax of the readout).
    pub fn accuracy_state(&self, ansatz: &Circuit, params: &[f64], split: Split) -> Result<f64> {
        let ds = self.data.split(split);
        let mut hits = 0usize;
        for i in 0..ds.len() {
            let circuit = self.prepared_circuit(ansatz, &ds.features[i])?;
            let state = run_circuit(&circuit, params, RunMode::default())?;
            let probs = qml_readout_state(&state, self.n_classes)?;
            if argmax(&probs) == ds.labels[i] {
                hits += 1;
            }
        }
        Ok(hits as f64 / ds.len().max(1) as f64)
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn prepare_circuit(encoder: &EncoderSpec, ansatz: &Circuit, features: &[f64]) -> Result<Circuit> {
    let mut full = Circuit::new(ansatz.n_qubits.max(encoder.n_qubits()));
    for g in encoder.encode(features)? {
        full.push(g)?;
    }
    for g in &ansatz.gates {
        full.push(g.clone())?;
    }
    Ok(full)
}

/// Softmax-NLL loss over one dataset split.
pub struct QmlLoss<'a> {
    pub encoder: &'a EncoderSpec,
    pub n_classes: usize,
    pub data: &'a Dataset,
}

impl Loss for QmlLoss<'_> {
    fn n_samples(&self) -> usize {
        self.data.len()
    }

    fn prepare<'a>(&self, ansatz: &'a Circuit, sample: usize) -> Result<Cow<'a, Circuit>> {
        Ok(Cow::Owned(prepare_circuit(self.encoder, ansatz, &self.data.features[sample])?))
    }

    fn expectations(&self, prepared: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
        let state = run_circuit(prepared, params, RunMode::default())?;
        Ok(z_expectations_state(&state))
    }

    fn loss_from(&self, evs: &[f64], sample: usize) -> f64 {
        let logits = qml_logits(evs, self.n_classes).expect("readout shape");
        nll(&logits, self.data.labels[sample])
    }

    fn dloss_dev(&self, evs: &[f64], sample: usize) -> Vec<f64> {
        let logits = qml_logits(evs, self.n_classes).expect("readout shape");
        let probs = softmax(&logits);
        let label = self.data.labels[sample];
        match self.n_classes {
            2 => {
                let g0 = probs[0] - if label == 0 { 1.0 } else { 0.0 };
                let g1 = probs[1] - if label == 1 { 1.0 } else { 0.0 };
                vec![g0, g0, g1, g1]
            }
            _ => (0..READOUT_QUBITS)
                .map(|k| probs[k] - if label == k { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::{finite_diff_grad, param_shift_grad, train, TrainConfig};
    use crate::qstate::{GateKind, Param};
    use crate::tasks::data::synthetic_dataset;

    #[test]
    fn uniform_probabilities_on_zero_state() {
        let state = crate::qstate::new_zero_state(4).unwrap();
        let probs = qml_readout_state(&state, 4).unwrap();
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn two_class_logits_on_basis_state() {
        // |0011⟩ (qubits 0,1 = 1): logits (−2, +2), P(class 1) = σ(4)
        let mut c = Circuit::new(4);
        c.push_fixed(GateKind::X, vec![0], &[]).unwrap();
        c.push_fixed(GateKind::X, vec![1], &[]).unwrap();
        let state = run_circuit(&c, &[], RunMode::Dynamic).unwrap();
        let logits = qml_logits(&z_expectations_state(&state), 2).unwrap();
        assert!((logits[0] + 2.0).abs() < 1e-12);
        assert!((logits[1] - 2.0).abs() < 1e-12);
        let probs = qml_readout_state(&state, 2).unwrap();
        let sigma4 = 1.0 / (1.0 + (-4.0f64).exp());
        assert!((probs[1] - sigma4).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one_and_permute() {
        let zs = [0.3, -0.2, 0.9, -0.5];
        let probs = softmax(&qml_logits(&zs, 4).unwrap());
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // permuting logits permutes probabilities
        let swapped = [zs[1], zs[0], zs[3], zs[2]];
        let probs2 = softmax(&qml_logits(&swapped, 4).unwrap());
        assert!((probs[0] - probs2[1]).abs() < 1e-12);
        assert!((probs[2] - probs2[3]).abs() < 1e-12);
    }

    fn tiny_task() -> QmlTask {
        let data = synthetic_dataset(40, 2, 16, 5).unwrap();
        QmlTask::new(EncoderSpec::mnist4(), 2, 4, data).unwrap()
    }

    fn small_ansatz() -> Circuit {
        let mut c = Circuit::new(4);
        let mut slot = 0;
        for q in 0..4 {
            c.push_gate(GateKind::RY, vec![q], vec![Param::Slot(slot)]).unwrap();
            slot += 1;
        }
        for q in 0..4 {
            c.push_gate(GateKind::RZZ, vec![q, (q + 1) % 4], vec![Param::Slot(slot)]).unwrap();
            slot += 1;
        }
        for q in 0..4 {
            c.push_gate(GateKind::RY, vec![q], vec![Param::Slot(slot)]).unwrap();
            slot += 1;
        }
        c
    }

    #[test]
    fn nll_gradient_matches_finite_difference() {
        let task = tiny_task();
        let loss = task.loss(Split::Train);
        let ansatz = small_ansatz();
        let params = crate::grad::init_params(ansatz.n_params, 3);
        let batch = [0, 1, 2, 3];
        let (_, shift) = param_shift_grad(&loss, &ansatz, &params, &batch).unwrap();
        let fd = finite_diff_grad(&loss, &ansatz, &params, &batch, 1e-4).unwrap();
        for (s, f) in shift.iter().zip(&fd) {
            assert!((s - f).abs() < 1e-6, "{s} vs {f}");
        }
    }

    #[test]
    fn separable_task_trains_above_95_percent() {
        let task = tiny_task();
        let loss = task.loss(Split::Train);
        let ansatz = small_ansatz();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 8,
            warmup_steps: 10,
            lr0: 0.05,
            seed: 1,
            ..Default::default()
        };
        let result = train(&ansatz, &loss, None, &cfg).unwrap();
        let acc = task.accuracy_state(&ansatz, &result.params, Split::Train).unwrap();
        assert!(acc > 0.95, "train accuracy {acc}");
    }

    #[test]
    fn noisy_readout_with_identity_confusion_matches_pure() {
        let task = tiny_task();
        let ansatz = small_ansatz();
        let params = crate::grad::init_params(ansatz.n_params, 17);
        let circuit = task.prepared_circuit(&ansatz, &task.data.train.features[0]).unwrap();
        let bound = circuit.bind(&params).unwrap();
        let state = run_circuit(&bound, &[], RunMode::Dynamic).unwrap();
        let rho = crate::noise::DensityMatrix::from_statevector(&state).unwrap();
        let device = DeviceModel::noiseless(4, [(0, 1), (1, 2), (2, 3)]);
        let noisy = qml_readout_density(&rho, &device, &[0, 1, 2, 3], 2).unwrap();
        let pure = qml_readout_state(&state, 2).unwrap();
        for (a, b) in noisy.iter().zip(&pure) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
