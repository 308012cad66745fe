//! Small dense complex-matrix helpers shared by the simulators, the compiler
//! and the test oracles.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Kronecker product with the right factor occupying the low-order index bits.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Embed a `2^k`-dimensional operator acting on the listed wires into the full
/// `2^n` space. Bit `j` of the operator's index corresponds to `wires[j]`, and
/// wire 0 is the least-significant bit of a basis index.
pub fn embed(op: &CMatrix, wires: &[usize], n_qubits: usize) -> CMatrix {
    let k = wires.len();
    debug_assert_eq!(op.nrows(), 1 << k);
    let dim = 1usize << n_qubits;
    let mut out = CMatrix::zeros(dim, dim);
    let mask: usize = wires.iter().map(|w| 1usize << w).sum();
    let gather = |idx: usize| -> usize {
        let mut g = 0usize;
        for (j, w) in wires.iter().enumerate() {
            g |= ((idx >> w) & 1) << j;
        }
        g
    };
    for col in 0..dim {
        let rest = col & !mask;
        let gc = gather(col);
        for gr in 0..(1 << k) {
            let mut row = rest;
            for (j, w) in wires.iter().enumerate() {
                row |= ((gr >> j) & 1) << w;
            }
            out[(row, col)] = op[(gr, gc)];
        }
    }
    out
}

/// Dense unitary of a fully bound circuit (product of embedded gate
/// unitaries). This is the reference path used by the oracle tests; it shares
/// nothing with the statevector kernels.
pub fn dense_unitary(circuit: &crate::qstate::Circuit, params: &[f64]) -> crate::error::Result<CMatrix> {
    let dim = 1usize << circuit.n_qubits;
    let mut u = identity(dim);
    for gate in &circuit.gates {
        let angles = gate.resolve(params)?;
        let g = crate::qstate::gate_unitary(gate.kind, &angles)?;
        u = embed(&g, &gate.wires, circuit.n_qubits) * u;
    }
    Ok(u)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `‖U·U† − I‖_max`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let p = u * u.adjoint();
    max_abs_diff(&p, &identity(u.nrows()))
}

/// `|tr(A† B)| / dim` — 1 exactly when A equals B up to a global phase.
pub fn phase_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    let t: Complex64 = (a.adjoint() * b).trace();
    t.norm() / a.nrows() as f64
}
