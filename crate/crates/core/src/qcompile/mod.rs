//! Compilation to the device basis {CNOT, SX, RZ, X}: gate decomposition,
//! logical→physical layout, greedy SWAP routing along BFS shortest paths,
//! adjacent-RZ merging and depth/gate statistics.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::noise::DeviceModel;
use crate::qstate::{Circuit, Gate, GateKind};

/// Injective assignment of logical circuit qubits to physical device qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitMapping {
    pub assignment: Vec<usize>,
}

impl QubitMapping {
    pub fn new(assignment: Vec<usize>, n_physical: usize) -> Result<Self> {
        let mut seen = vec![false; n_physical];
        for &p in &assignment {
            if p >= n_physical {
                return Err(Error::Validation(format!(
                    "mapping targets physical qubit {p} on a {n_physical}-qubit device"
                )));
            }
            if seen[p] {
                return Err(Error::Validation(format!("mapping repeats physical qubit {p}")));
            }
            seen[p] = true;
        }
        Ok(QubitMapping { assignment })
    }

    pub fn identity(n: usize) -> Self {
        QubitMapping { assignment: (0..n).collect() }
    }
}

/// A circuit compiled to basis gates on physical wires.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    pub circuit: Circuit,
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    /// compiled gate index → source gate index
    pub provenance: Vec<usize>,
    /// SWAPs inserted by the router, in emission order (each expands to
    /// three CNOTs in `circuit`)
    pub swaps: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CircuitStats {
    pub depth: usize,
    pub n_gates: usize,
    pub n_1q: usize,
    pub n_cnot: usize,
}

pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = a - two_pi * ((a + PI) / two_pi).floor();
    // floor arithmetic can land exactly on π for inputs like -π
    if r >= PI { r - two_pi } else { r }
}

fn is_zero(a: f64) -> bool {
    normalize_angle(a).abs() < 1e-12
}

/// One single-qubit basis operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisOp {
    Rz(f64),
    Sx,
    X,
}

/// Decompose `U3(θ,φ,λ)` into the basis. Zero patterns (angles that
/// normalize to exactly zero) collapse the generic five-gate sequence to
/// four gates (one zero among θ-present cases) or a single RZ (θ = 0).
pub fn decompose_u3(theta: f64, phi: f64, lambda: f64) -> Vec<BasisOp> {
    let mut seq = Vec::with_capacity(5);
    let rz = |s: &mut Vec<BasisOp>, a: f64| {
        let a = normalize_angle(a);
        if a.abs() >= 1e-12 {
            s.push(BasisOp::Rz(a));
        }
    };
    if is_zero(theta) {
        rz(&mut seq, phi + lambda);
    } else if is_zero(lambda) {
        // U3(θ,φ,0) ∝ RZ(φ+π)·SX·RZ(θ+π)·SX
        seq.push(BasisOp::Sx);
        rz(&mut seq, theta + PI);
        seq.push(BasisOp::Sx);
        rz(&mut seq, phi + PI);
    } else if is_zero(phi) {
        // U3(θ,0,λ) ∝ SX·RZ(π−θ)·SX·RZ(λ+π)
        rz(&mut seq, lambda + PI);
        seq.push(BasisOp::Sx);
        rz(&mut seq, PI - theta);
        seq.push(BasisOp::Sx);
    } else {
        // U3(θ,φ,λ) ∝ RZ(φ+π)·SX·RZ(θ+π)·SX·RZ(λ)
        rz(&mut seq, lambda);
        seq.push(BasisOp::Sx);
        rz(&mut seq, theta + PI);
        seq.push(BasisOp::Sx);
        rz(&mut seq, phi + PI);
    }
    seq
}

/// Euler angles of an arbitrary 2×2 unitary, up to global phase.
fn u3_angles_of(u: &CMatrix) -> (f64, f64, f64) {
    let (a, b, c, d) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let theta = 2.0 * c.norm().atan2(a.norm());
    if c.norm() < 1e-12 {
        return (0.0, 0.0, (d * a.conj()).arg());
    }
    if a.norm() < 1e-12 {
        return (PI, c.arg(), (-b).arg());
    }
    let g = a.arg();
    (theta, c.arg() - g, (-b).arg() - g)
}

fn one_q_basis(kind: GateKind, angles: &[f64]) -> Result<Vec<BasisOp>> {
    use GateKind::*;
    Ok(match kind {
        RZ | U1 => {
            let a = normalize_angle(angles[0]);
            if a.abs() < 1e-12 { vec![] } else { vec![BasisOp::Rz(a)] }
        }
        X => vec![BasisOp::X],
        SX => vec![BasisOp::Sx],
        _ => {
            let u = crate::qstate::gate_unitary(kind, angles)?;
            let (t, p, l) = u3_angles_of(&u);
            decompose_u3(t, p, l)
        }
    })
}

struct Emitter {
    gates: Vec<Gate>,
    provenance: Vec<usize>,
    src: usize,
}

impl Emitter {
    fn push(&mut self, kind: GateKind, wires: Vec<usize>, angles: &[f64]) {
        self.gates.push(Gate::fixed(kind, wires, angles).expect("basis gate"));
        self.provenance.push(self.src);
    }

    fn ops(&mut self, wire: usize, ops: &[BasisOp]) {
        for op in ops {
            match *op {
                BasisOp::Rz(a) => self.push(GateKind::RZ, vec![wire], &[a]),
                BasisOp::Sx => self.push(GateKind::SX, vec![wire], &[]),
                BasisOp::X => self.push(GateKind::X, vec![wire], &[]),
            }
        }
    }

    fn one_q(&mut self, kind: GateKind, wire: usize, angles: &[f64]) -> Result<()> {
        let ops = one_q_basis(kind, angles)?;
        self.ops(wire, &ops);
        Ok(())
    }

    fn cnot(&mut self, a: usize, b: usize) {
        self.push(GateKind::CNOT, vec![a, b], &[]);
    }

    fn h(&mut self, wire: usize) -> Result<()> {
        self.one_q(GateKind::H, wire, &[])
    }

    fn rzz(&mut self, a: usize, b: usize, theta: f64) {
        if is_zero(theta) {
            return;
        }
        self.cnot(a, b);
        self.push(GateKind::RZ, vec![b], &[normalize_angle(theta)]);
        self.cnot(a, b);
    }

    fn ryy(&mut self, a: usize, b: usize, theta: f64) -> Result<()> {
        if is_zero(theta) {
            return Ok(());
        }
        // Y = (S·H) Z (S·H)†, so conjugate an RZZ by S†,H … H,S on each wire
        for w in [a, b] {
            self.push(GateKind::RZ, vec![w], &[-PI / 2.0]);
            self.h(w)?;
        }
        self.rzz(a, b, theta);
        for w in [a, b] {
            self.h(w)?;
            self.push(GateKind::RZ, vec![w], &[PI / 2.0]);
        }
        Ok(())
    }

    fn rxx(&mut self, a: usize, b: usize, theta: f64) -> Result<()> {
        if is_zero(theta) {
            return Ok(());
        }
        self.h(a)?;
        self.h(b)?;
        self.rzz(a, b, theta);
        self.h(a)?;
        self.h(b)?;
        Ok(())
    }

    fn cphase(&mut self, a: usize, b: usize, gamma: f64) {
        if is_zero(gamma) {
            return;
        }
        let g = normalize_angle(gamma);
        self.push(GateKind::RZ, vec![a], &[g / 2.0]);
        self.push(GateKind::RZ, vec![b], &[g / 2.0]);
        self.cnot(a, b);
        self.push(GateKind::RZ, vec![b], &[-g / 2.0]);
        self.cnot(a, b);
    }

    fn u3_ops(&mut self, wire: usize, theta: f64, phi: f64, lambda: f64) {
        let ops = decompose_u3(theta, phi, lambda);
        self.ops(wire, &ops);
    }

    fn gate(&mut self, gate: &Gate, wires: &[usize]) -> Result<()> {
        use GateKind::*;
        let angles = gate.resolve(&[])?;
        match gate.kind {
            CNOT => self.cnot(wires[0], wires[1]),
            CZ => {
                self.h(wires[1])?;
                self.cnot(wires[0], wires[1]);
                self.h(wires[1])?;
            }
            SWAP => {
                self.cnot(wires[0], wires[1]);
                self.cnot(wires[1], wires[0]);
                self.cnot(wires[0], wires[1]);
            }
            SQSWAP => {
                // √SWAP = phase · RXX(π/4)·RYY(π/4)·RZZ(π/4) (commuting factors)
                self.rxx(wires[0], wires[1], PI / 4.0)?;
                self.ryy(wires[0], wires[1], PI / 4.0)?;
                self.rzz(wires[0], wires[1], PI / 4.0);
            }
            RZZ => self.rzz(wires[0], wires[1], angles[0]),
            RXX => self.rxx(wires[0], wires[1], angles[0])?,
            RZX => {
                if !is_zero(angles[0]) {
                    self.h(wires[1])?;
                    self.rzz(wires[0], wires[1], angles[0]);
                    self.h(wires[1])?;
                }
            }
            CU3 => {
                let (theta, phi, lambda) = (angles[0], angles[1], angles[2]);
                if is_zero(theta) {
                    self.cphase(wires[0], wires[1], phi + lambda);
                } else {
                    let (c, t) = (wires[0], wires[1]);
                    let g1 = normalize_angle((lambda + phi) / 2.0);
                    if g1.abs() >= 1e-12 {
                        self.push(GateKind::RZ, vec![c], &[g1]);
                    }
                    let g2 = normalize_angle((lambda - phi) / 2.0);
                    if g2.abs() >= 1e-12 {
                        self.push(GateKind::RZ, vec![t], &[g2]);
                    }
                    self.cnot(c, t);
                    self.u3_ops(t, -theta / 2.0, 0.0, -(phi + lambda) / 2.0);
                    self.cnot(c, t);
                    self.u3_ops(t, theta / 2.0, phi, 0.0);
                }
            }
            _ => self.one_q(gate.kind, wires[0], &angles)?,
        }
        Ok(())
    }
}

/// Decompose one bound gate into basis gates on the same wires.
pub fn decompose_gate(gate: &Gate) -> Result<Vec<Gate>> {
    let mut em = Emitter { gates: Vec::new(), provenance: Vec::new(), src: 0 };
    let wires = gate.wires.clone();
    em.gate(gate, &wires)?;
    Ok(em.gates)
}

fn bfs_distances(device: &DeviceModel, from: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; device.n_physical];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(q) = queue.pop_front() {
        let d = dist[q].unwrap();
        for nb in device.neighbors(q) {
            if dist[nb].is_none() {
                dist[nb] = Some(d + 1);
                queue.push_back(nb);
            }
        }
    }
    dist
}

/// Compile a circuit: bind parameters, place logical qubits per the mapping,
/// insert SWAPs along BFS shortest paths for uncoupled 2-qubit gates (moving
/// the first operand toward the second, ties broken by lower physical
/// index), decompose to the basis and merge adjacent RZ rotations.
pub fn route(
    circuit: &Circuit,
    params: &[f64],
    mapping: &QubitMapping,
    device: &DeviceModel,
) -> Result<CompiledCircuit> {
    if circuit.n_qubits > mapping.assignment.len() {
        return Err(Error::Validation(format!(
            "circuit has {} qubits but mapping covers {}",
            circuit.n_qubits,
            mapping.assignment.len()
        )));
    }
    let bound = circuit.bind(params)?;
    let mut layout: Vec<usize> = mapping.assignment[..circuit.n_qubits].to_vec();
    let initial_layout = layout.clone();
    let mut em = Emitter { gates: Vec::new(), provenance: Vec::new(), src: 0 };
    let mut swaps = Vec::new();

    for (src, gate) in bound.gates.iter().enumerate() {
        em.src = src;
        if gate.wires.len() == 2 {
            let target = layout[gate.wires[1]];
            let mut cur = layout[gate.wires[0]];
            if !device.coupled(cur, target) {
                let dist = bfs_distances(device, target);
                let mut d = dist[cur].ok_or_else(|| {
                    Error::Routing(format!("no path between physical qubits {cur} and {target}"))
                })?;
                while d > 1 {
                    let next = device
                        .neighbors(cur)
                        .into_iter()
                        .filter(|&nb| dist[nb] == Some(d - 1))
                        .min()
                        .expect("BFS distance decreases along some neighbor");
                    em.cnot(cur, next);
                    em.cnot(next, cur);
                    em.cnot(cur, next);
                    swaps.push((cur, next));
                    for slot in layout.iter_mut() {
                        if *slot == cur {
                            *slot = next;
                        } else if *slot == next {
                            *slot = cur;
                        }
                    }
                    cur = next;
                    d -= 1;
                }
            }
        }
        let phys: Vec<usize> = gate.wires.iter().map(|&w| layout[w]).collect();
        em.gate(gate, &phys)?;
    }

    let (gates, provenance) = merge_rz(em.gates, em.provenance);
    let mut compiled = Circuit::new(device.n_physical);
    for g in gates {
        compiled.push(g)?;
    }
    Ok(CompiledCircuit {
        circuit: compiled,
        initial_layout,
        final_layout: layout,
        provenance,
        swaps,
    })
}

/// Merge adjacent RZ gates on the same wire and drop identity rotations.
fn merge_rz(gates: Vec<Gate>, provenance: Vec<usize>) -> (Vec<Gate>, Vec<usize>) {
    let mut out: Vec<Option<(Gate, usize)>> = Vec::with_capacity(gates.len());
    let mut last_on_wire: Vec<Option<usize>> = Vec::new();
    for (gate, prov) in gates.into_iter().zip(provenance) {
        let max_wire = gate.wires.iter().copied().max().unwrap_or(0);
        if last_on_wire.len() <= max_wire {
            last_on_wire.resize(max_wire + 1, None);
        }
        if gate.kind == GateKind::RZ {
            let w = gate.wires[0];
            let angle = gate.resolve(&[]).expect("bound")[0];
            if let Some(idx) = last_on_wire[w] {
                if let Some((prev, _)) = &out[idx] {
                    if prev.kind == GateKind::RZ {
                        let merged = normalize_angle(prev.resolve(&[]).unwrap()[0] + angle);
                        if merged.abs() < 1e-12 {
                            out[idx] = None;
                            last_on_wire[w] = None;
                        } else {
                            let prov_keep = out[idx].as_ref().unwrap().1;
                            out[idx] = Some((
                                Gate::fixed(GateKind::RZ, vec![w], &[merged]).unwrap(),
                                prov_keep,
                            ));
                        }
                        continue;
                    }
                }
            }
            if normalize_angle(angle).abs() < 1e-12 {
                continue;
            }
        }
        for &w in &gate.wires {
            last_on_wire[w] = Some(out.len());
        }
        out.push(Some((gate, prov)));
    }
    out.into_iter().flatten().unzip()
}

/// Depth (longest chain of gates sharing wires) and gate counts.
pub fn circuit_stats(compiled: &CompiledCircuit) -> CircuitStats {
    stats_of(&compiled.circuit)
}

pub fn stats_of(circuit: &Circuit) -> CircuitStats {
    let mut wire_depth = vec![0usize; circuit.n_qubits];
    let mut stats = CircuitStats { n_gates: circuit.gates.len(), ..Default::default() };
    for gate in &circuit.gates {
        let d = 1 + gate.wires.iter().map(|&w| wire_depth[w]).max().unwrap_or(0);
        for &w in &gate.wires {
            wire_depth[w] = d;
        }
        stats.depth = stats.depth.max(d);
        if gate.kind == GateKind::CNOT {
            stats.n_cnot += 1;
        } else {
            stats.n_1q += 1;
        }
    }
    stats
}

impl CircuitStats {
    /// Structured one-record text form.
    pub fn to_record(self) -> String {
        format!(
            "depth = {}\nn_gates = {}\nn_1q = {}\nn_cnot = {}\n",
            self.depth, self.n_gates, self.n_1q, self.n_cnot
        )
    }
}
