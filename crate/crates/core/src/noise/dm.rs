//! Density-matrix simulation with per-gate depolarizing and thermal
//! relaxation, plus the success-rate estimator for circuits too large to
//! simulate.
//!
//! The 2^n × 2^n matrix is stored row-major and treated as a 2n-qubit
//! amplitude vector: column bits are qubits `0..n`, row bits `n..2n`. Gate
//! conjugation and channels then reuse the statevector kernels; channels are
//! applied through their superoperator `Σ K ⊗ conj(K)` in a single pass,
//! which is algebraically identical to the literal Kraus sum (tested).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::noise::channel::NoiseChannel;
use crate::noise::device::DeviceModel;
use crate::qstate::{kernel, Circuit, PauliString, Statevector};

pub const MAX_DM_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub n_qubits: usize,
    /// row-major, `data[row * 2^n + col]`
    pub data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero_state(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DM_QUBITS {
            return Err(Error::Capacity(format!(
                "density matrix supports 1..={MAX_DM_QUBITS} qubits, got {n}; \
                 use the success-rate estimator for larger circuits"
            )));
        }
        let dim = 1usize << n;
        let mut data = vec![c(0., 0.); dim * dim];
        data[0] = c(1., 0.);
        Ok(DensityMatrix { n_qubits: n, data })
    }

    pub fn from_statevector(state: &Statevector) -> Result<Self> {
        let dim = state.amps.len();
        let mut dm = DensityMatrix::zero_state(state.n_qubits)?;
        for r in 0..dim {
            for col in 0..dim {
                dm.data[r * dim + col] = state.amps[r] * state.amps[col].conj();
            }
        }
        Ok(dm)
    }

    fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    pub fn diagonal_probs(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i].re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for col in 0..dim {
                let d = (self.data[r * dim + col] - self.data[col * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let m = CMatrix::from_fn(dim, dim, |r, col| self.data[r * dim + col]);
        let eig = m.symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `ρ → U ρ U†`.
    pub fn apply_unitary(&mut self, u: &CMatrix, wires: &[usize]) {
        let n = self.n_qubits;
        let row_wires: Vec<usize> = wires.iter().map(|w| w + n).collect();
        let conj = u.map(|v| Complex64::new(v.re, -v.im));
        apply_on(&mut self.data, u, &row_wires);
        apply_on(&mut self.data, &conj, wires);
    }

    /// Channel application through the superoperator (single pass).
    pub fn apply_channel(&mut self, ch: &NoiseChannel) {
        let n = self.n_qubits;
        let s = ch.superoperator();
        let mut all_wires: Vec<usize> = ch.wires.clone();
        all_wires.extend(ch.wires.iter().map(|w| w + n));
        // superoperator index: low bits = column subsystem, high bits = row
        kernel::apply_k(&mut self.data, &s, &all_wires);
    }

    /// Literal `Σ_k K ρ K†` (reference path for tests).
    pub fn apply_channel_kraus(&mut self, ch: &NoiseChannel) {
        let n = self.n_qubits;
        let row_wires: Vec<usize> = ch.wires.iter().map(|w| w + n).collect();
        let mut acc = vec![c(0., 0.); self.data.len()];
        for k in &ch.kraus {
            let mut term = self.data.clone();
            let conj = k.map(|v| Complex64::new(v.re, -v.im));
            apply_on(&mut term, k, &row_wires);
            apply_on(&mut term, &conj, &ch.wires);
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
        }
        self.data = acc;
    }

    /// `coefficient · tr(P ρ)`.
    pub fn expect_pauli(&self, obs: &PauliString) -> f64 {
        use crate::qstate::Pauli;
        let dim = self.dim();
        let mut flip = 0usize;
        let mut zmask = 0usize;
        let mut ymask = 0usize;
        for (&q, &p) in &obs.ops {
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    ymask |= 1 << q;
                }
                Pauli::Z => zmask |= 1 << q,
            }
        }
        let n_y = ymask.count_ones() as i32;
        let mut acc = c(0., 0.);
        // tr(Pρ) = Σ_i P[i, i^flip] ρ[i^flip, i]
        for i in 0..dim {
            let j = i ^ flip;
            let zsign = if ((j & zmask).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
            let y_up = (j & ymask).count_ones() as i32;
            let quarter = (n_y - y_up) - y_up;
            let phase = match quarter.rem_euclid(4) {
                0 => c(1., 0.),
                1 => c(0., 1.),
                2 => c(-1., 0.),
                _ => c(0., -1.),
            };
            acc += phase * c(zsign, 0.0) * self.data[j * dim + i];
        }
        obs.coefficient * acc.re
    }

    /// Diagonal distribution marginalized onto the listed qubits (bit `i` of
    /// the output index corresponds to `qubits[i]`).
    pub fn marginal_probs(&self, qubits: &[usize]) -> Vec<f64> {
        let probs = self.diagonal_probs();
        let mut out = vec![0.0; 1 << qubits.len()];
        for (idx, p) in probs.iter().enumerate() {
            let mut g = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                g |= ((idx >> q) & 1) << j;
            }
            out[g] += p;
        }
        out
    }
}

fn apply_on(data: &mut [Complex64], m: &CMatrix, wires: &[usize]) {
    match wires.len() {
        1 => kernel::apply_1q(data, m, wires[0]),
        2 => kernel::apply_2q(data, m, wires[0], wires[1]),
        _ => kernel::apply_k(data, m, wires),
    }
}

/// Run a fully bound circuit under the device's noise model: each gate's
/// unitary conjugation, then depolarizing at the gate's calibrated error
/// rate, then thermal relaxation for the gate's duration on each touched
/// wire.
pub fn dm_run(circuit: &Circuit, device: &DeviceModel) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zero_state(circuit.n_qubits)?;
    for gate in &circuit.gates {
        let angles = gate.resolve(&[])?;
        let u = crate::qstate::gate_unitary(gate.kind, &angles)?;
        for &w in &gate.wires {
            if w >= circuit.n_qubits {
                return Err(Error::Wire(format!("wire {w} out of range")));
            }
        }
        rho.apply_unitary(&u, &gate.wires);

        let p = match gate.wires.len() {
            1 => device.err_1q(gate.wires[0], gate.kind),
            _ => device.err_2q(gate.wires[0], gate.wires[1]),
        };
        if p > 0.0 {
            rho.apply_channel(&NoiseChannel::depolarizing(p, gate.wires.clone())?);
        }
        let dur = device.duration(gate.kind);
        if dur > 0.0 {
            for &w in &gate.wires {
                let (t1, t2) = (device.t1[w.min(device.t1.len() - 1)], device.t2[w.min(device.t2.len() - 1)]);
                if t1.is_finite() || t2.is_finite() {
                    rho.apply_channel(&NoiseChannel::thermal_relaxation(t1, t2, dur, w)?);
                }
            }
        }
    }
    Ok(rho)
}

/// Push an outcome distribution through the per-qubit readout confusion
/// matrices. Bit `i` of a distribution index corresponds to `qubits[i]`.
pub fn apply_readout_error(probs: &[f64], device: &DeviceModel, qubits: &[usize]) -> Vec<f64> {
    let mut out = probs.to_vec();
    for (j, &q) in qubits.iter().enumerate() {
        let m = device.confusion(q);
        let bit = 1usize << j;
        for i in 0..out.len() {
            if i & bit != 0 {
                continue;
            }
            let p0 = out[i];
            let p1 = out[i | bit];
            out[i] = p0 * m[0][0] + p1 * m[1][0];
            out[i | bit] = p0 * m[0][1] + p1 * m[1][1];
        }
    }
    out
}

/// Product over gates of `(1 − error rate)`; the fast estimator for circuits
/// beyond density-matrix capacity.
pub fn success_rate(circuit: &Circuit, device: &DeviceModel) -> Result<f64> {
    let mut r = 1.0;
    for gate in &circuit.gates {
        match gate.wires.len() {
            1 => r *= 1.0 - device.err_1q(gate.wires[0], gate.kind),
            _ => {
                let (a, b) = (gate.wires[0], gate.wires[1]);
                if !device.coupled(a, b) {
                    return Err(Error::Routing(format!(
                        "{} on uncoupled pair ({a},{b}); circuit should have been routed",
                        gate.kind.name()
                    )));
                }
                r *= 1.0 - device.err_2q(a, b);
            }
        }
    }
    Ok(r)
}

/// Noise-free loss inflated by the estimated success rate.
pub fn augmented_loss(l_noise_free: f64, r_overall: f64) -> Result<f64> {
    if r_overall <= 0.0 {
        return Err(Error::Numeric(format!("success rate must be positive, got {r_overall}")));
    }
    Ok(l_noise_free / r_overall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::channel::{depolarizing_kraus, thermal_relaxation_kraus};
    use crate::qstate::{run_circuit, GateKind, Pauli, RunMode};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bound_circuit(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Circuit {
        use GateKind::*;
        let kinds = [RX, RY, RZ, SX, X, H, CNOT, CZ, RZZ, U3];
        let mut circ = Circuit::new(n);
        for _ in 0..len {
            let kind = kinds[rng.random_range(0..kinds.len())];
            let mut wires = vec![rng.random_range(0..n)];
            if kind.arity() == 2 {
                loop {
                    let w = rng.random_range(0..n);
                    if w != wires[0] {
                        wires.push(w);
                        break;
                    }
                }
            }
            let angles: Vec<f64> = (0..kind.n_params())
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            circ.push_fixed(kind, wires, &angles).unwrap();
        }
        circ
    }

    #[test]
    fn zero_noise_matches_pure_projector() {
        let device = DeviceModel::noiseless(4, [(0, 1), (1, 2), (2, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let circ = random_bound_circuit(4, 20, &mut rng);
            let rho = dm_run(&circ, &device).unwrap();
            let psi = run_circuit(&circ, &[], RunMode::Dynamic).unwrap();
            let expected = DensityMatrix::from_statevector(&psi).unwrap();
            let max_diff = rho
                .data
                .iter()
                .zip(&expected.data)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(max_diff < 1e-9, "zero-noise dm mismatch {max_diff}");
        }
    }

    #[test]
    fn dm_invariants_under_noise() {
        let model = crate::noise::device::t_topology_fixture(1e-3, 1e-2);
        let device = DeviceModel::from_text(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..5 {
            let circ = random_bound_circuit(5, 25, &mut rng);
            let rho = dm_run(&circ, &device).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-9);
            assert!(rho.trace().im.abs() < 1e-9);
            assert!(rho.hermiticity_error() < 1e-9);
            assert!(rho.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn depolarized_x_gate_z_expectation() {
        // single X with 1q depolarizing p: ⟨Z⟩ = −(1 − 4p/3)
        for p in [0.0, 0.01, 0.3, 0.75] {
            let text = format!("[topology]\nqubits = 1\n[errors_1q]\n* X {p}\n");
            let device = DeviceModel::from_text(&text).unwrap();
            let mut circ = Circuit::new(1);
            circ.push_fixed(GateKind::X, vec![0], &[]).unwrap();
            let rho = dm_run(&circ, &device).unwrap();
            let z = rho.expect_pauli(&PauliString::z(0));
            assert!((z + (1.0 - 4.0 * p / 3.0)).abs() < 1e-12, "p={p}: {z}");
        }
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let mut rho = DensityMatrix::zero_state(1).unwrap();
        rho.apply_channel(&depolarizing_kraus(0.75, 1).unwrap());
        let dim = 2;
        for r in 0..dim {
            for col in 0..dim {
                let expect = if r == col { 0.5 } else { 0.0 };
                assert!((rho.data[r * dim + col] - c(expect, 0.)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn superoperator_matches_literal_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let circ = random_bound_circuit(3, 12, &mut rng);
            let psi = run_circuit(&circ, &[], RunMode::Dynamic).unwrap();
            let rho0 = DensityMatrix::from_statevector(&psi).unwrap();
            let channels = [
                NoiseChannel::depolarizing(rng.random_range(0.0..0.5), vec![1]).unwrap(),
                NoiseChannel::depolarizing(rng.random_range(0.0..0.5), vec![2, 0]).unwrap(),
                NoiseChannel::thermal_relaxation(50e-6, 70e-6, 200e-9, 1).unwrap(),
            ];
            for ch in &channels {
                let mut fast = rho0.clone();
                let mut slow = rho0.clone();
                fast.apply_channel(ch);
                slow.apply_channel_kraus(ch);
                let diff = fast
                    .data
                    .iter()
                    .zip(&slow.data)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-12, "superoperator path diverged: {diff}");
            }
        }
    }

    #[test]
    fn relaxation_population_decay() {
        // t_gate = t1, t2 = 2·t1, input |1⟩⟨1| → P(1) = e^{−1}
        let t1 = 80e-6;
        let ch = thermal_relaxation_kraus(t1, 2.0 * t1, t1).unwrap();
        let mut rho = DensityMatrix::zero_state(1).unwrap();
        let x = crate::qstate::gate_unitary(GateKind::X, &[]).unwrap();
        rho.apply_unitary(&x, &[0]);
        rho.apply_channel(&ch);
        let p1 = rho.data[3].re;
        assert!((p1 - (-1.0f64).exp()).abs() < 1e-12, "p1 = {p1}");
    }

    #[test]
    fn readout_error_examples() {
        let ident = DeviceModel::noiseless(2, [(0, 1)]);
        let probs = vec![0.25, 0.25, 0.25, 0.25];
        assert_eq!(apply_readout_error(&probs, &ident, &[0, 1]), probs);

        let text = "[topology]\nqubits = 1\n[readout]\n0 0.1 0.0\n";
        let device = DeviceModel::from_text(text).unwrap();
        let out = apply_readout_error(&[1.0, 0.0], &device, &[0]);
        assert!((out[0] - 0.9).abs() < 1e-12);
        assert!((out[1] - 0.1).abs() < 1e-12);

        // two qubits with independent errors: product of marginals
        let text = "[topology]\nqubits = 2\n0 1\n[readout]\n0 0.1 0.05\n1 0.2 0.15\n";
        let device = DeviceModel::from_text(text).unwrap();
        let joint = apply_readout_error(&[1.0, 0.0, 0.0, 0.0], &device, &[0, 1]);
        let m0 = apply_readout_error(&[1.0, 0.0], &device, &[0]);
        let m1 = apply_readout_error(&[1.0, 0.0], &device, &[1]);
        for i in 0..4 {
            let expect = m0[i & 1] * m1[(i >> 1) & 1];
            assert!((joint[i] - expect).abs() < 1e-12);
        }
        let total: f64 = joint.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(joint.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn success_rate_arithmetic() {
        let device = DeviceModel::from_text(
            "[topology]\nqubits = 2\n0 1\n[errors_1q]\n* * 0.01\n[errors_2q]\n* * 0.02\n",
        )
        .unwrap();
        let empty = Circuit::new(2);
        assert_eq!(success_rate(&empty, &device).unwrap(), 1.0);

        let mut two = Circuit::new(2);
        two.push_fixed(GateKind::X, vec![0], &[]).unwrap();
        two.push_fixed(GateKind::CNOT, vec![0, 1], &[]).unwrap();
        let r = success_rate(&two, &device).unwrap();
        assert!((r - 0.99 * 0.98).abs() < 1e-12);

        let mut ten = Circuit::new(2);
        for _ in 0..10 {
            ten.push_fixed(GateKind::CNOT, vec![0, 1], &[]).unwrap();
        }
        let device10 = DeviceModel::from_text(
            "[topology]\nqubits = 2\n0 1\n[errors_2q]\n* * 0.01\n",
        )
        .unwrap();
        let r10 = success_rate(&ten, &device10).unwrap();
        assert!((r10 - 0.99f64.powi(10)).abs() < 1e-12);

        // multiplicative under concatenation
        let mut both = two.clone();
        for g in &ten.gates {
            both.push(g.clone()).unwrap();
        }
        let device_both = DeviceModel::from_text(
            "[topology]\nqubits = 2\n0 1\n[errors_1q]\n* * 0.01\n[errors_2q]\n* * 0.02\n",
        )
        .unwrap();
        let ra = success_rate(&two, &device_both).unwrap();
        let rb = success_rate(&ten, &device_both).unwrap();
        let rab = success_rate(&both, &device_both).unwrap();
        assert!((rab - ra * rb).abs() < 1e-12);
    }

    #[test]
    fn uncoupled_gate_is_routing_error() {
        let device = DeviceModel::from_text("[topology]\nqubits = 3\n0 1\n1 2\n").unwrap();
        let mut circ = Circuit::new(3);
        circ.push_fixed(GateKind::CNOT, vec![0, 2], &[]).unwrap();
        assert!(matches!(success_rate(&circ, &device), Err(Error::Routing(_))));
    }

    #[test]
    fn augmented_loss_examples() {
        assert_eq!(augmented_loss(0.5, 1.0).unwrap(), 0.5);
        let a = augmented_loss(0.5, 0.9702).unwrap();
        assert!((a - 0.51536).abs() < 1e-4);
        assert!(augmented_loss(0.5, 0.9).unwrap() > augmented_loss(0.5, 0.95).unwrap());
        assert!(augmented_loss(0.5, 0.0).is_err());
    }

    #[test]
    fn capacity_error_beyond_ten_qubits() {
        let err = DensityMatrix::zero_state(11);
        assert!(matches!(err, Err(Error::Capacity(_))));
    }

    #[test]
    fn bell_state_expectations_from_dm() {
        let device = DeviceModel::noiseless(2, [(0, 1)]);
        let mut circ = Circuit::new(2);
        circ.push_fixed(GateKind::H, vec![0], &[]).unwrap();
        circ.push_fixed(GateKind::CNOT, vec![0, 1], &[]).unwrap();
        let rho = dm_run(&circ, &device).unwrap();
        let xx = PauliString::new([(0, Pauli::X), (1, Pauli::X)], 1.0);
        let yy = PauliString::new([(0, Pauli::Y), (1, Pauli::Y)], 1.0);
        let zz = PauliString::new([(0, Pauli::Z), (1, Pauli::Z)], 1.0);
        assert!((rho.expect_pauli(&xx) - 1.0).abs() < 1e-12);
        assert!((rho.expect_pauli(&yy) + 1.0).abs() < 1e-12);
        assert!((rho.expect_pauli(&zz) - 1.0).abs() < 1e-12);
    }
}
