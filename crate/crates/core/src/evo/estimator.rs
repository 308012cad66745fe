//! The performance estimator: scores a gene by instantiating its SubCircuit
//! with inherited SuperCircuit parameters, compiling it under the gene's
//! qubit mapping, and evaluating on one of three backends.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evo::gene::Gene;
use crate::grad::{batch_loss, sample_loss};
use crate::noise::{augmented_loss, dm_run, success_rate, DeviceModel, MAX_DM_QUBITS};
use crate::qcompile::{route, CompiledCircuit, QubitMapping};
use crate::qstate::Circuit;
use crate::space::SuperCircuit;
use crate::tasks::{
    argmax, qml_readout_density, qml_readout_state, vqe_expectation, vqe_expectation_noisy,
    QmlTask, Split, Task, READOUT_QUBITS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Density-matrix simulation with the device noise model (≤ 10 qubits).
    NoisySim,
    /// Noise-free loss inflated by the compiled circuit's success rate.
    SuccessRate,
    /// Plain noise-free simulation (the noise-unaware baseline).
    NoiseFree,
}

impl EstimatorMode {
    /// Small circuits get the noisy simulator, large ones the success-rate
    /// estimate.
    pub fn auto(n_qubits: usize) -> Self {
        if n_qubits <= MAX_DM_QUBITS {
            EstimatorMode::NoisySim
        } else {
            EstimatorMode::SuccessRate
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::NoisySim => "noisy",
            EstimatorMode::SuccessRate => "success_rate",
            EstimatorMode::NoiseFree => "noise_free",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "noisy" => EstimatorMode::NoisySim,
            "success_rate" => EstimatorMode::SuccessRate,
            "noise_free" => EstimatorMode::NoiseFree,
            other => return Err(Error::Validation(format!("unknown estimator mode `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimatorCounters {
    /// total gene scorings requested (population × scoring rounds)
    pub scoring_passes: u64,
    /// distinct genes actually simulated
    pub unique_evals: u64,
    /// genes scored +∞ because of routing/capacity failures
    pub culled: u64,
}

pub struct Estimator<'a> {
    pub mode: EstimatorMode,
    pub device: &'a DeviceModel,
    pub task: &'a Task,
    pub sc: &'a SuperCircuit,
    valid_ids: Vec<usize>,
    cache: Mutex<std::collections::BTreeMap<Gene, f64>>,
    passes: AtomicU64,
    unique: AtomicU64,
    culled: AtomicU64,
}

impl<'a> Estimator<'a> {
    pub fn new(
        mode: EstimatorMode,
        device: &'a DeviceModel,
        task: &'a Task,
        sc: &'a SuperCircuit,
        valid_subset: Option<usize>,
    ) -> Self {
        let valid_ids = default_valid_ids(task, valid_subset);
        Estimator {
            mode,
            device,
            task,
            sc,
            valid_ids,
            cache: Mutex::new(std::collections::BTreeMap::new()),
            passes: AtomicU64::new(0),
            unique: AtomicU64::new(0),
            culled: AtomicU64::new(0),
        }
    }

    pub fn counters(&self) -> EstimatorCounters {
        EstimatorCounters {
            scoring_passes: self.passes.load(Ordering::Relaxed),
            unique_evals: self.unique.load(Ordering::Relaxed),
            culled: self.culled.load(Ordering::Relaxed),
        }
    }

    /// Score a gene (lower is better); infeasible genes score +∞.
    pub fn compute(&self, gene: &Gene) -> f64 {
        match self.try_compute(gene) {
            Ok(score) => score,
            Err(err) => {
                self.culled.fetch_add(1, Ordering::Relaxed);
                log::warn!("gene culled ({err}): {}", gene.serialize());
                f64::INFINITY
            }
        }
    }

    fn try_compute(&self, gene: &Gene) -> Result<f64> {
        let spec = gene.to_spec(&self.sc.space)?;
        let view = self.sc.instantiate(&spec)?;
        let params = view.gather(&self.sc.params);
        let mapping = gene.to_mapping(self.device.n_physical)?;
        score_circuit(self.mode, self.device, self.task, &view.circuit, &params, &mapping, &self.valid_ids)
    }

    /// Score a population with memoization; results are position-stable and
    /// independent of evaluation order.
    pub fn score_batch(&self, pop: &[Gene]) -> Vec<f64> {
        self.passes.fetch_add(pop.len() as u64, Ordering::Relaxed);
        let todo: Vec<Gene> = {
            let cache = self.cache.lock().unwrap();
            let mut seen = std::collections::BTreeSet::new();
            pop.iter()
                .filter(|g| !cache.contains_key(*g) && seen.insert((*g).clone()))
                .cloned()
                .collect()
        };
        let computed: Vec<(Gene, f64)> =
            todo.into_par_iter().map(|g| { let s = self.compute(&g); (g, s) }).collect();
        let mut cache = self.cache.lock().unwrap();
        self.unique.fetch_add(computed.len() as u64, Ordering::Relaxed);
        for (g, s) in computed {
            cache.insert(g, s);
        }
        pop.iter().map(|g| cache[g]).collect()
    }
}

/// Score one bound ansatz under a mapping on the given backend mode; shared
/// by the gene estimator, the pruning sweep and the eval stage.
pub fn score_circuit(
    mode: EstimatorMode,
    device: &DeviceModel,
    task: &Task,
    ansatz: &Circuit,
    params: &[f64],
    mapping: &QubitMapping,
    ids: &[usize],
) -> Result<f64> {
    if mode == EstimatorMode::NoiseFree {
        return noise_free_score(task, ansatz, params, ids);
    }
    let compiled = route(ansatz, params, mapping, device)?;
    match mode {
        EstimatorMode::NoisySim => match task {
            Task::Qml(t) => noisy_qml_loss(t, &compiled, device, Split::Valid, ids),
            Task::Vqe(t) => vqe_expectation_noisy(&compiled, device, &t.hamiltonian),
        },
        EstimatorMode::SuccessRate => match task {
            Task::Qml(t) => success_rate_qml_loss(t, ansatz, params, &compiled, device, ids),
            Task::Vqe(t) => {
                let l = vqe_expectation(ansatz, params, &t.hamiltonian)?;
                augmented_loss(l, success_rate(&compiled.circuit, device)?)
            }
        },
        EstimatorMode::NoiseFree => unreachable!(),
    }
}

/// Validation-subset sample indices used by the estimator.
pub fn default_valid_ids(task: &Task, valid_subset: Option<usize>) -> Vec<usize> {
    match task {
        Task::Qml(t) => {
            let n = t.data.valid.len();
            (0..valid_subset.map_or(n, |s| s.min(n))).collect()
        }
        Task::Vqe(_) => vec![0],
    }
}

/// Validation loss (QML) or Hamiltonian expectation (VQE) on the noise-free
/// statevector backend.
pub fn noise_free_score(task: &Task, ansatz: &Circuit, params: &[f64], ids: &[usize]) -> Result<f64> {
    match task {
        Task::Qml(t) => batch_loss(&t.loss(Split::Valid), ansatz, params, ids),
        Task::Vqe(t) => vqe_expectation(ansatz, params, &t.hamiltonian),
    }
}

fn prepare_noisy_sample(
    task: &QmlTask,
    compiled: &CompiledCircuit,
    device: &DeviceModel,
    features: &[f64],
) -> Result<(Circuit, Vec<usize>)> {
    let mut enc = Circuit::new(task.n_qubits);
    for g in task.encoder.encode(features)? {
        enc.push(g)?;
    }
    let mapping = QubitMapping::new(compiled.initial_layout.clone(), device.n_physical)?;
    let enc_routed = route(&enc, &[], &mapping, device)?;
    let mut full = Circuit::new(device.n_physical);
    for g in &enc_routed.circuit.gates {
        full.push(g.clone())?;
    }
    for g in &compiled.circuit.gates {
        full.push(g.clone())?;
    }
    let wires: Vec<usize> = (0..READOUT_QUBITS).map(|q| compiled.final_layout[q]).collect();
    Ok((full, wires))
}

/// Mean NLL over the listed samples under the noisy simulator with readout
/// error.
pub fn noisy_qml_loss(
    task: &QmlTask,
    compiled: &CompiledCircuit,
    device: &DeviceModel,
    split: Split,
    ids: &[usize],
) -> Result<f64> {
    let ds = task.data.split(split);
    let mut acc = 0.0;
    for &i in ids {
        let (full, wires) = prepare_noisy_sample(task, compiled, device, &ds.features[i])?;
        let rho = dm_run(&full, device)?;
        let probs = qml_readout_density(&rho, device, &wires, task.n_classes)?;
        acc -= probs[ds.labels[i]].ln();
    }
    Ok(acc / ids.len().max(1) as f64)
}

/// Classification accuracy under the noisy simulator.
pub fn noisy_qml_accuracy(
    task: &QmlTask,
    compiled: &CompiledCircuit,
    device: &DeviceModel,
    split: Split,
    ids: &[usize],
) -> Result<f64> {
    let ds = task.data.split(split);
    let mut hits = 0usize;
    for &i in ids {
        let (full, wires) = prepare_noisy_sample(task, compiled, device, &ds.features[i])?;
        let rho = dm_run(&full, device)?;
        let probs = qml_readout_density(&rho, device, &wires, task.n_classes)?;
        if argmax(&probs) == ds.labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / ids.len().max(1) as f64)
}

/// Noise-free accuracy over the listed samples.
pub fn pure_qml_accuracy(
    task: &QmlTask,
    ansatz: &Circuit,
    params: &[f64],
    split: Split,
    ids: &[usize],
) -> Result<f64> {
    let ds = task.data.split(split);
    let mut hits = 0usize;
    for &i in ids {
        let circuit = task.prepared_circuit(ansatz, &ds.features[i])?;
        let state = crate::qstate::run_circuit(&circuit, params, crate::qstate::RunMode::default())?;
        let probs = qml_readout_state(&state, task.n_classes)?;
        if argmax(&probs) == ds.labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / ids.len().max(1) as f64)
}

fn success_rate_qml_loss(
    task: &QmlTask,
    ansatz: &Circuit,
    params: &[f64],
    compiled: &CompiledCircuit,
    device: &DeviceModel,
    ids: &[usize],
) -> Result<f64> {
    let r_ansatz = success_rate(&compiled.circuit, device)?;
    let loss = task.loss(Split::Valid);
    let ds = &task.data.valid;
    let mapping = QubitMapping::new(compiled.initial_layout.clone(), device.n_physical)?;
    let mut acc = 0.0;
    for &i in ids {
        let l = sample_loss(&loss, ansatz, params, i)?;
        let mut enc = Circuit::new(task.n_qubits);
        for g in task.encoder.encode(&ds.features[i])? {
            enc.push(g)?;
        }
        let enc_routed = route(&enc, &[], &mapping, device)?;
        let r = r_ansatz * success_rate(&enc_routed.circuit, device)?;
        acc += augmented_loss(l, r)?;
    }
    Ok(acc / ids.len().max(1) as f64)
}
