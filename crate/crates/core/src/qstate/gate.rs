//! Gate kinds and their unitaries.
//!
//! Conventions: wire 0 is the least-significant bit of a basis index, and for
//! a multi-wire gate, bit `j` of the gate-matrix index corresponds to
//! `wires[j]`. Two-qubit controlled gates take `wires[0]` as the control.
//! Rotations follow `exp(-i θ/2 · P)`; `U3(θ,φ,λ)` has `cos(θ/2)` at (0,0)
//! and `e^{iφ}·sin(θ/2)` at (1,0). `√H` and `√SWAP` are principal roots.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    RXX,
    RZX,
    RZZ,
    U1,
    U3,
    CU3,
    CZ,
    CNOT,
    H,
    SH,
    SX,
    X,
    S,
    T,
    SWAP,
    SQSWAP,
}

pub const ALL_KINDS: [GateKind; 19] = [
    GateKind::RX,
    GateKind::RY,
    GateKind::RZ,
    GateKind::RXX,
    GateKind::RZX,
    GateKind::RZZ,
    GateKind::U1,
    GateKind::U3,
    GateKind::CU3,
    GateKind::CZ,
    GateKind::CNOT,
    GateKind::H,
    GateKind::SH,
    GateKind::SX,
    GateKind::X,
    GateKind::S,
    GateKind::T,
    GateKind::SWAP,
    GateKind::SQSWAP,
];

impl GateKind {
    pub fn arity(self) -> usize {
        use GateKind::*;
        match self {
            RXX | RZX | RZZ | CU3 | CZ | CNOT | SWAP | SQSWAP => 2,
            _ => 1,
        }
    }

    pub fn n_params(self) -> usize {
        use GateKind::*;
        match self {
            U3 | CU3 => 3,
            U1 | RX | RY | RZ | RXX | RZX | RZZ => 1,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        use GateKind::*;
        match self {
            RX => "RX",
            RY => "RY",
            RZ => "RZ",
            RXX => "RXX",
            RZX => "RZX",
            RZZ => "RZZ",
            U1 => "U1",
            U3 => "U3",
            CU3 => "CU3",
            CZ => "CZ",
            CNOT => "CNOT",
            H => "H",
            SH => "SH",
            SX => "SX",
            X => "X",
            S => "S",
            T => "T",
            SWAP => "SWAP",
            SQSWAP => "SQSWAP",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL_KINDS.iter().copied().find(|k| k.name() == name)
    }
}

/// One angle of a gate: either a fixed radian value or a reference to a
/// trainable parameter slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Fixed(f64),
    Slot(usize),
}

/// A gate instance inside a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub params: Vec<Param>,
}

impl Gate {
    pub fn new(kind: GateKind, wires: Vec<usize>, params: Vec<Param>) -> Result<Self> {
        if wires.len() != kind.arity() {
            return Err(Error::Arity(format!(
                "{} takes {} wire(s), got {}",
                kind.name(),
                kind.arity(),
                wires.len()
            )));
        }
        if kind.arity() == 2 && wires[0] == wires[1] {
            return Err(Error::Wire(format!("{} wires must be distinct", kind.name())));
        }
        if params.len() != kind.n_params() {
            return Err(Error::Arity(format!(
                "{} takes {} parameter(s), got {}",
                kind.name(),
                kind.n_params(),
                params.len()
            )));
        }
        Ok(Gate { kind, wires, params })
    }

    pub fn fixed(kind: GateKind, wires: Vec<usize>, angles: &[f64]) -> Result<Self> {
        Self::new(kind, wires, angles.iter().map(|&a| Param::Fixed(a)).collect())
    }

    /// Resolve this gate's angles against a parameter vector.
    pub fn resolve(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.params
            .iter()
            .map(|p| match *p {
                Param::Fixed(a) => Ok(a),
                Param::Slot(s) => params.get(s).copied().ok_or_else(|| {
                    Error::Validation(format!("parameter slot {s} out of range ({})", params.len()))
                }),
            })
            .collect()
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.params.iter().filter_map(|p| match *p {
            Param::Slot(s) => Some(s),
            Param::Fixed(_) => None,
        })
    }
}

fn check_params(kind: GateKind, params: &[f64]) -> Result<()> {
    if params.len() != kind.n_params() {
        return Err(Error::Arity(format!(
            "{} takes {} parameter(s), got {}",
            kind.name(),
            kind.n_params(),
            params.len()
        )));
    }
    Ok(())
}

fn mat2(entries: [Complex64; 4]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &entries)
}

fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> CMatrix {
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    mat2([
        c(ct, 0.0),
        -Complex64::from_polar(st, lambda),
        Complex64::from_polar(st, phi),
        Complex64::from_polar(ct, phi + lambda),
    ])
}

/// `exp(-i θ/2 P)` for a ±1-eigenvalue Pauli product `P` given as a matrix.
fn rotation(p: &CMatrix, theta: f64) -> CMatrix {
    let dim = p.nrows();
    let cos = c((theta / 2.0).cos(), 0.0);
    let misin = c(0.0, -(theta / 2.0).sin());
    CMatrix::identity(dim, dim) * cos + p * misin
}

fn swap_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c(1., 0.);
    m[(1, 2)] = c(1., 0.);
    m[(2, 1)] = c(1., 0.);
    m[(3, 3)] = c(1., 0.);
    m
}

fn h_matrix() -> CMatrix {
    let s = FRAC_1_SQRT_2;
    mat2([c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
}

/// Principal square root of an involution (`M² = I`): `((1+i)I + (1-i)M)/2`.
fn principal_sqrt_of_involution(m: &CMatrix) -> CMatrix {
    let dim = m.nrows();
    let a = c(0.5, 0.5);
    let b = c(0.5, -0.5);
    CMatrix::identity(dim, dim) * a + m * b
}

/// The unitary matrix of a gate kind at the given angles.
pub fn gate_unitary(kind: GateKind, params: &[f64]) -> Result<CMatrix> {
    use GateKind::*;
    check_params(kind, params)?;
    let m = match kind {
        RX => {
            let x = mat2([c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
            rotation(&x, params[0])
        }
        RY => {
            let (ct, st) = ((params[0] / 2.0).cos(), (params[0] / 2.0).sin());
            mat2([c(ct, 0.), c(-st, 0.), c(st, 0.), c(ct, 0.)])
        }
        RZ => {
            let half = params[0] / 2.0;
            mat2([
                Complex64::from_polar(1.0, -half),
                c(0., 0.),
                c(0., 0.),
                Complex64::from_polar(1.0, half),
            ])
        }
        U1 => mat2([c(1., 0.), c(0., 0.), c(0., 0.), Complex64::from_polar(1.0, params[0])]),
        U3 => u3_matrix(params[0], params[1], params[2]),
        H => h_matrix(),
        SH => principal_sqrt_of_involution(&h_matrix()),
        SX => mat2([c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)]),
        X => mat2([c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        S => mat2([c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)]),
        T => mat2([c(1., 0.), c(0., 0.), c(0., 0.), Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
        SWAP => swap_matrix(),
        SQSWAP => principal_sqrt_of_involution(&swap_matrix()),
        CNOT => {
            // control = wires[0] = index bit 0, target = wires[1] = bit 1
            let mut m = CMatrix::zeros(4, 4);
            m[(0, 0)] = c(1., 0.);
            m[(3, 1)] = c(1., 0.);
            m[(2, 2)] = c(1., 0.);
            m[(1, 3)] = c(1., 0.);
            m
        }
        CZ => {
            let mut m = CMatrix::identity(4, 4);
            m[(3, 3)] = c(-1., 0.);
            m
        }
        CU3 => {
            // control = wires[0]; indices {1,3} carry the controlled block
            let u = u3_matrix(params[0], params[1], params[2]);
            let mut m = CMatrix::identity(4, 4);
            m[(1, 1)] = u[(0, 0)];
            m[(1, 3)] = u[(0, 1)];
            m[(3, 1)] = u[(1, 0)];
            m[(3, 3)] = u[(1, 1)];
            m
        }
        RZZ => {
            let half = params[0] / 2.0;
            let minus = Complex64::from_polar(1.0, -half);
            let plus = Complex64::from_polar(1.0, half);
            let mut m = CMatrix::zeros(4, 4);
            m[(0, 0)] = minus;
            m[(1, 1)] = plus;
            m[(2, 2)] = plus;
            m[(3, 3)] = minus;
            m
        }
        RXX => {
            let mut xx = CMatrix::zeros(4, 4);
            xx[(0, 3)] = c(1., 0.);
            xx[(1, 2)] = c(1., 0.);
            xx[(2, 1)] = c(1., 0.);
            xx[(3, 0)] = c(1., 0.);
            rotation(&xx, params[0])
        }
        RZX => {
            // Z on wires[0] (bit 0), X on wires[1] (bit 1)
            let mut zx = CMatrix::zeros(4, 4);
            for idx in 0..4usize {
                let b0 = idx & 1;
                let flipped = idx ^ 2;
                zx[(flipped, idx)] = c(if b0 == 0 { 1. } else { -1. }, 0.);
            }
            rotation(&zx, params[0])
        }
    };
    Ok(m)
}
