//! Pauli Hamiltonians: the `coefficient pauli-word` text format, dense
//! construction and the exact-diagonalization oracle.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qstate::{Pauli, PauliString};

pub const MAX_DIAG_QUBITS: usize = 12;

/// Weighted sum of Pauli strings; Hermitian by construction (real
/// coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub terms: Vec<PauliString>,
    pub n_qubits: usize,
}

impl Hamiltonian {
    /// Parse lines of `coefficient pauli-word`, e.g. `-0.4804 ZIZ`.
    /// Character `i` of the word acts on qubit `i`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n_qubits = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let coeff: f64 = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad coefficient", lineno + 1)))?;
            let word = fields
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing pauli word", lineno + 1)))?;
            if fields.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing fields", lineno + 1)));
            }
            match n_qubits {
                None => n_qubits = Some(word.len()),
                Some(n) if n == word.len() => {}
                Some(n) => {
                    return Err(Error::Parse(format!(
                        "line {}: word length {} differs from {n}",
                        lineno + 1,
                        word.len()
                    )));
                }
            }
            let mut ops = Vec::new();
            for (q, ch) in word.chars().enumerate() {
                match ch {
                    'I' => {}
                    'X' => ops.push((q, Pauli::X)),
                    'Y' => ops.push((q, Pauli::Y)),
                    'Z' => ops.push((q, Pauli::Z)),
                    other => {
                        return Err(Error::Parse(format!(
                            "line {}: bad pauli symbol `{other}`",
                            lineno + 1
                        )));
                    }
                }
            }
            terms.push(PauliString::new(ops, coeff));
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::Parse("empty hamiltonian".into()))?;
        Ok(Hamiltonian { terms, n_qubits })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            let word: String = (0..self.n_qubits)
                .map(|q| match t.ops.get(&q) {
                    None => 'I',
                    Some(Pauli::X) => 'X',
                    Some(Pauli::Y) => 'Y',
                    Some(Pauli::Z) => 'Z',
                })
                .collect();
            let _ = writeln!(out, "{} {}", t.coefficient, word);
        }
        out
    }

    pub fn dense(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            m += t.dense(self.n_qubits);
        }
        m
    }
}

pub fn load_hamiltonian(path: &Path) -> Result<Hamiltonian> {
    let text = std::fs::read_to_string(path)?;
    Hamiltonian::from_text(&text)
}

/// Minimum eigenvalue of the dense Hamiltonian (≤ 12 qubits).
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64> {
    if h.n_qubits > MAX_DIAG_QUBITS {
        return Err(Error::Capacity(format!(
            "exact diagonalization supports ≤ {MAX_DIAG_QUBITS} qubits, got {}",
            h.n_qubits
        )));
    }
    let eig = h.dense().symmetric_eigen();
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}
