//! Kraus noise channels: depolarizing and thermal relaxation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, kron, max_abs_diff, CMatrix};

fn pauli_1q() -> [CMatrix; 4] {
    [
        CMatrix::identity(2, 2),
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

/// A trace-preserving Kraus channel on one or two wires.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub wires: Vec<usize>,
    pub kraus: Vec<CMatrix>,
}

impl NoiseChannel {
    /// Depolarizing channel with total error probability `p`.
    /// One wire: `{√(1−p)·I, √(p/3)·X, √(p/3)·Y, √(p/3)·Z}`; two wires: the
    /// 16-element two-qubit Pauli set with weight `p/15` off the identity.
    pub fn depolarizing(p: f64, wires: Vec<usize>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("depolarizing probability {p} outside [0,1]")));
        }
        let paulis = pauli_1q();
        let kraus = match wires.len() {
            1 => {
                let mut k = vec![paulis[0].clone() * c((1.0 - p).sqrt(), 0.0)];
                for pm in &paulis[1..] {
                    k.push(pm.clone() * c((p / 3.0).sqrt(), 0.0));
                }
                k
            }
            2 => {
                let mut k = Vec::with_capacity(16);
                for hi in 0..4 {
                    for lo in 0..4 {
                        let weight = if hi == 0 && lo == 0 { (1.0 - p).sqrt() } else { (p / 15.0).sqrt() };
                        // wires[0] is the low index bit
                        k.push(kron(&paulis[hi], &paulis[lo]) * c(weight, 0.0));
                    }
                }
                k
            }
            other => return Err(Error::Arity(format!("depolarizing channel on {other} wires"))),
        };
        Ok(NoiseChannel { wires, kraus })
    }

    /// Amplitude damping `γ = 1 − e^{−t/T1}` composed with pure dephasing
    /// `λ = 1 − e^{−t/Tφ}` where `1/Tφ = 1/T2 − 1/(2·T1)`.
    pub fn thermal_relaxation(t1: f64, t2: f64, t_gate: f64, wire: usize) -> Result<Self> {
        if t1 <= 0.0 || t2 <= 0.0 {
            return Err(Error::Validation("relaxation times must be positive".into()));
        }
        if t2 > 2.0 * t1 + 1e-12 {
            return Err(Error::Validation(format!("t2 ({t2}) exceeds 2·t1 ({})", 2.0 * t1)));
        }
        if t_gate < 0.0 {
            return Err(Error::Validation("gate duration must be non-negative".into()));
        }
        let gamma = 1.0 - (-t_gate / t1).exp();
        let inv_tphi = (1.0 / t2 - 1.0 / (2.0 * t1)).max(0.0);
        let lambda = 1.0 - (-t_gate * inv_tphi).exp();

        let damp = [
            CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c((1.0 - gamma).sqrt(), 0.)]),
            CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(gamma.sqrt(), 0.), c(0., 0.), c(0., 0.)]),
        ];
        let p_z = lambda / 2.0;
        let deph = [
            CMatrix::identity(2, 2) * c((1.0 - p_z).sqrt(), 0.),
            CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]) * c(p_z.sqrt(), 0.),
        ];
        let mut kraus = Vec::new();
        for d in &deph {
            for a in &damp {
                let k = d * a;
                if k.iter().any(|v| v.norm() > 1e-15) {
                    kraus.push(k);
                }
            }
        }
        Ok(NoiseChannel { wires: vec![wire], kraus })
    }

    /// `‖Σ K†K − I‖_max`; zero for a trace-preserving channel.
    pub fn trace_preservation_error(&self) -> f64 {
        let dim = self.kraus[0].nrows();
        let mut acc = CMatrix::zeros(dim, dim);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        max_abs_diff(&acc, &CMatrix::identity(dim, dim))
    }

    /// Superoperator `Σ_k K_k ⊗ conj(K_k)` acting on the flattened density
    /// matrix; the low index bits address the column subsystem.
    pub fn superoperator(&self) -> CMatrix {
        let dim = self.kraus[0].nrows();
        let mut s = CMatrix::zeros(dim * dim, dim * dim);
        for k in &self.kraus {
            let conj = k.map(|v| Complex64::new(v.re, -v.im));
            s += kron(k, &conj);
        }
        s
    }
}

/// Spec-shaped constructor: wires default to `0..n_wires`.
pub fn depolarizing_kraus(p: f64, n_wires: usize) -> Result<NoiseChannel> {
    NoiseChannel::depolarizing(p, (0..n_wires).collect())
}

/// Spec-shaped constructor on wire 0.
pub fn thermal_relaxation_kraus(t1: f64, t2: f64, t_gate: f64) -> Result<NoiseChannel> {
    NoiseChannel::thermal_relaxation(t1, t2, t_gate, 0)
}
