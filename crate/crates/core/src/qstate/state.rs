//! Statevector simulation: gate-application kernels, dynamic and gate-fusion
//! execution, Pauli expectations and shot sampling.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, embed, kron, CMatrix};
use crate::qstate::circuit::Circuit;
use crate::qstate::gate::{gate_unitary, Gate};

/// Raw kernels over an amplitude slice; shared with the density-matrix
/// backend, which views a 2^n × 2^n matrix as a 2n-qubit amplitude vector.
pub(crate) mod kernel {
    use super::*;

    pub fn apply_1q(amps: &mut [Complex64], u: &CMatrix, q: usize) {
        let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
        let bit = 1usize << q;
        let n = amps.len();
        let mut base = 0usize;
        while base < n {
            for low in base..base + bit {
                let i0 = low;
                let i1 = low | bit;
                let a0 = amps[i0];
                let a1 = amps[i1];
                amps[i0] = u00 * a0 + u01 * a1;
                amps[i1] = u10 * a0 + u11 * a1;
            }
            base += bit << 1;
        }
    }

    pub fn apply_2q(amps: &mut [Complex64], u: &CMatrix, q0: usize, q1: usize) {
        let b0 = 1usize << q0;
        let b1 = 1usize << q1;
        let mut m = [[c(0., 0.); 4]; 4];
        for r in 0..4 {
            for col in 0..4 {
                m[r][col] = u[(r, col)];
            }
        }
        let n = amps.len();
        for i in 0..n {
            if i & (b0 | b1) != 0 {
                continue;
            }
            let idx = [i, i | b0, i | b1, i | b0 | b1];
            let a = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for r in 0..4 {
                amps[idx[r]] = m[r][0] * a[0] + m[r][1] * a[1] + m[r][2] * a[2] + m[r][3] * a[3];
            }
        }
    }

    /// General k-wire matrix application; `m` need not be unitary. Bit `j` of
    /// the matrix index corresponds to `wires[j]`.
    pub fn apply_k(amps: &mut [Complex64], m: &CMatrix, wires: &[usize]) {
        let k = wires.len();
        let dim = 1usize << k;
        debug_assert_eq!(m.nrows(), dim);
        let mask: usize = wires.iter().map(|w| 1usize << w).sum();
        let n = amps.len();
        let mut gathered = vec![c(0., 0.); dim];
        let offsets: Vec<usize> = (0..dim)
            .map(|g| {
                let mut off = 0usize;
                for (j, w) in wires.iter().enumerate() {
                    off |= ((g >> j) & 1) << w;
                }
                off
            })
            .collect();
        for i in 0..n {
            if i & mask != 0 {
                continue;
            }
            for g in 0..dim {
                gathered[g] = amps[i | offsets[g]];
            }
            for (r, &off) in offsets.iter().enumerate() {
                let mut acc = c(0., 0.);
                for (col, &a) in gathered.iter().enumerate() {
                    acc += m[(r, col)] * a;
                }
                amps[i | off] = acc;
            }
        }
    }
}

/// Pure-state amplitudes over `n_qubits`; qubit 0 is the least-significant
/// bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub n_qubits: usize,
    pub amps: Vec<Complex64>,
}

pub const MAX_STATEVECTOR_QUBITS: usize = 24;

/// |0…0⟩ on `n` qubits.
pub fn new_zero_state(n: usize) -> Result<Statevector> {
    if n == 0 || n > MAX_STATEVECTOR_QUBITS {
        return Err(Error::Capacity(format!(
            "statevector supports 1..={MAX_STATEVECTOR_QUBITS} qubits, got {n}"
        )));
    }
    let mut amps = vec![c(0., 0.); 1usize << n];
    amps[0] = c(1., 0.);
    Ok(Statevector { n_qubits: n, amps })
}

impl Statevector {
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Apply one bound gate in place.
    pub fn apply(&mut self, gate: &Gate, params: &[f64]) -> Result<()> {
        for &w in &gate.wires {
            if w >= self.n_qubits {
                return Err(Error::Wire(format!("wire {w} out of range for state of {} qubits", self.n_qubits)));
            }
        }
        let angles = gate.resolve(params)?;
        let u = gate_unitary(gate.kind, &angles)?;
        match gate.wires.len() {
            1 => kernel::apply_1q(&mut self.amps, &u, gate.wires[0]),
            2 => kernel::apply_2q(&mut self.amps, &u, gate.wires[0], gate.wires[1]),
            _ => kernel::apply_k(&mut self.amps, &u, &gate.wires),
        }
        Ok(())
    }
}

/// Pure wrapper over [`Statevector::apply`].
pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply(gate, &[])?;
    Ok(out)
}

/// Execution mode: `Dynamic` applies gates one by one; `Static` fuses runs of
/// gates whose combined support stays within `fuse_width` wires into a single
/// unitary before touching the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Dynamic,
    Static { fuse_width: usize },
}

impl Default for RunMode {
    fn default() -> Self {
        RunMode::Static { fuse_width: 2 }
    }
}

pub fn run_circuit(circuit: &Circuit, params: &[f64], mode: RunMode) -> Result<Statevector> {
    if params.len() != circuit.n_params {
        return Err(Error::Validation(format!(
            "expected {} parameters, got {}",
            circuit.n_params,
            params.len()
        )));
    }
    let mut state = new_zero_state(circuit.n_qubits.max(1))?;
    if circuit.n_qubits == 0 {
        return Ok(state);
    }
    match mode {
        RunMode::Dynamic => {
            for gate in &circuit.gates {
                state.apply(gate, params)?;
            }
        }
        RunMode::Static { fuse_width } => {
            let fuse_width = fuse_width.max(1);
            let mut group: Option<(Vec<usize>, CMatrix)> = None;
            for gate in &circuit.gates {
                for &w in &gate.wires {
                    if w >= circuit.n_qubits {
                        return Err(Error::Wire(format!("wire {w} out of range")));
                    }
                }
                let angles = gate.resolve(params)?;
                let u = gate_unitary(gate.kind, &angles)?;
                group = Some(match group.take() {
                    None => (gate.wires.clone(), u),
                    Some((wires, acc)) => {
                        let mut merged = wires.clone();
                        for &w in &gate.wires {
                            if !merged.contains(&w) {
                                merged.push(w);
                            }
                        }
                        if merged.len() <= fuse_width {
                            let local: Vec<usize> = gate
                                .wires
                                .iter()
                                .map(|w| merged.iter().position(|m| m == w).unwrap())
                                .collect();
                            let acc_local: Vec<usize> = wires
                                .iter()
                                .map(|w| merged.iter().position(|m| m == w).unwrap())
                                .collect();
                            let k = merged.len();
                            let fused = embed(&u, &local, k) * embed(&acc, &acc_local, k);
                            (merged, fused)
                        } else {
                            kernel::apply_k(&mut state.amps, &acc, &wires);
                            (gate.wires.clone(), u)
                        }
                    }
                });
            }
            if let Some((wires, acc)) = group {
                kernel::apply_k(&mut state.amps, &acc, &wires);
            }
        }
    }
    Ok(state)
}

/// Single-qubit Pauli operators for observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// A weighted Pauli product; identity on every qubit not listed.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    pub ops: BTreeMap<usize, Pauli>,
    pub coefficient: f64,
}

impl PauliString {
    pub fn new(ops: impl IntoIterator<Item = (usize, Pauli)>, coefficient: f64) -> Self {
        PauliString { ops: ops.into_iter().collect(), coefficient }
    }

    pub fn z(qubit: usize) -> Self {
        Self::new([(qubit, Pauli::Z)], 1.0)
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.ops.keys().next_back().copied()
    }

    /// Dense matrix over `n` qubits (oracle/diagonalization path).
    pub fn dense(&self, n: usize) -> CMatrix {
        let mut m = CMatrix::identity(1, 1);
        for q in (0..n).rev() {
            let op = match self.ops.get(&q) {
                None => CMatrix::identity(2, 2),
                Some(Pauli::X) => CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
                Some(Pauli::Y) => CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
                Some(Pauli::Z) => CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
            };
            m = kron(&m, &op);
        }
        m * c(self.coefficient, 0.0)
    }
}

/// `coefficient · ⟨ψ|P|ψ⟩`.
pub fn expectation(state: &Statevector, obs: &PauliString) -> f64 {
    let mut flip = 0usize;
    let mut zmask = 0usize;
    let mut ymask = 0usize;
    for (&q, &p) in &obs.ops {
        debug_assert!(q < state.n_qubits);
        match p {
            Pauli::X => flip |= 1 << q,
            Pauli::Y => {
                flip |= 1 << q;
                ymask |= 1 << q;
            }
            Pauli::Z => zmask |= 1 << q,
        }
    }
    let n_y = ymask.count_ones() as usize;
    let mut acc = c(0., 0.);
    for (i, amp) in state.amps.iter().enumerate() {
        let j = i ^ flip;
        // phase: Z signs on target bits of |j⟩; each Y contributes i or -i
        // depending on the source bit.
        let zsign = if ((j & zmask).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
        let y_up = (j & ymask).count_ones() as usize; // source bits that are 1
        // each Y with source bit 1 gives -i; source bit 0 gives +i
        let quarter = (n_y - y_up) as i32 - y_up as i32; // net power of i
        let phase = match quarter.rem_euclid(4) {
            0 => c(1., 0.),
            1 => c(0., 1.),
            2 => c(-1., 0.),
            _ => c(0., -1.),
        };
        acc += amp.conj() * phase * state.amps[j] * zsign;
    }
    obs.coefficient * acc.re
}

/// Measure all qubits `shots` times. Keys are bitstrings with qubit n−1
/// leftmost and qubit 0 rightmost (binary rendering of the basis index).
pub fn sample_counts(state: &Statevector, shots: u64, rng: &mut ChaCha8Rng) -> BTreeMap<String, u64> {
    let probs = state.probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..shots {
        let r: f64 = rng.random_range(0.0..acc.max(f64::MIN_POSITIVE));
        let idx = cdf.partition_point(|&x| x <= r).min(probs.len() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(idx, n)| (format_bitstring(idx, state.n_qubits), n))
        .collect()
}

pub fn format_bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .rev()
        .map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}
