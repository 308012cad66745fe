//! Circuits and the one-gate-per-line text format.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::qstate::gate::{Gate, GateKind, Param};

/// An ordered gate sequence over `n_qubits`, with `n_params` trainable slots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit { n_qubits, gates: Vec::new(), n_params: 0 }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        for &w in &gate.wires {
            if w >= self.n_qubits {
                return Err(Error::Wire(format!(
                    "wire {w} out of range for {}-qubit circuit",
                    self.n_qubits
                )));
            }
        }
        for s in gate.slots() {
            self.n_params = self.n_params.max(s + 1);
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn push_gate(&mut self, kind: GateKind, wires: Vec<usize>, params: Vec<Param>) -> Result<()> {
        self.push(Gate::new(kind, wires, params)?)
    }

    pub fn push_fixed(&mut self, kind: GateKind, wires: Vec<usize>, angles: &[f64]) -> Result<()> {
        self.push(Gate::fixed(kind, wires, angles)?)
    }

    /// Checks that every parameter slot below `n_params` is referenced.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n_params];
        for g in &self.gates {
            for s in g.slots() {
                seen[s] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Validation(format!("parameter slot {missing} is never referenced")));
        }
        Ok(())
    }

    /// Replace every slot reference by its current value.
    pub fn bind(&self, params: &[f64]) -> Result<Circuit> {
        let mut out = Circuit::new(self.n_qubits);
        for g in &self.gates {
            let angles = g.resolve(params)?;
            out.push(Gate::fixed(g.kind, g.wires.clone(), &angles)?)?;
        }
        Ok(out)
    }

    /// True when no gate references a parameter slot.
    pub fn is_bound(&self) -> bool {
        self.gates.iter().all(|g| g.slots().next().is_none())
    }

    /// Serialize to the text format: `KIND wire[,wire] [angle|@slot][,...]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let wires: Vec<String> = g.wires.iter().map(|w| w.to_string()).collect();
            let _ = write!(out, "{} {}", g.kind.name(), wires.join(","));
            if !g.params.is_empty() {
                let ps: Vec<String> = g
                    .params
                    .iter()
                    .map(|p| match *p {
                        Param::Fixed(a) => format!("{a}"),
                        Param::Slot(s) => format!("@{s}"),
                    })
                    .collect();
                let _ = write!(out, " {}", ps.join(","));
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text format. With `n_qubits = None`, the qubit count is
    /// `max wire + 1`.
    pub fn from_text(text: &str, n_qubits: Option<usize>) -> Result<Circuit> {
        let mut gates = Vec::new();
        let mut max_wire = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let kind_name = fields.next().unwrap();
            let kind = GateKind::from_name(kind_name)
                .ok_or_else(|| Error::Parse(format!("line {}: unknown gate `{kind_name}`", lineno + 1)))?;
            let wires_field = fields
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing wires", lineno + 1)))?;
            let wires = wires_field
                .split(',')
                .map(|w| {
                    w.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("line {}: bad wire `{w}`", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            let params = match fields.next() {
                None => Vec::new(),
                Some(pf) => pf
                    .split(',')
                    .map(|p| {
                        if let Some(slot) = p.strip_prefix('@') {
                            slot.parse::<usize>()
                                .map(Param::Slot)
                                .map_err(|_| Error::Parse(format!("line {}: bad slot `{p}`", lineno + 1)))
                        } else {
                            p.parse::<f64>()
                                .map(Param::Fixed)
                                .map_err(|_| Error::Parse(format!("line {}: bad angle `{p}`", lineno + 1)))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            if fields.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing fields", lineno + 1)));
            }
            for &w in &wires {
                max_wire = max_wire.max(w);
            }
            gates.push(Gate::new(kind, wires, params)?);
        }
        let n = match n_qubits {
            Some(n) => n,
            None if gates.is_empty() => 0,
            None => max_wire + 1,
        };
        let mut circuit = Circuit::new(n);
        for g in gates {
            circuit.push(g)?;
        }
        circuit.validate()?;
        Ok(circuit)
    }
}

/// A random circuit over the given kinds, one fresh parameter slot per gate
/// angle, with angle values drawn uniformly from [−π, π). Used by the
/// gradient-check command and the oracle suites.
pub fn random_circuit(
    n_qubits: usize,
    n_gates: usize,
    kinds: &[GateKind],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Circuit, Vec<f64>) {
    use rand::RngExt;
    let mut circuit = Circuit::new(n_qubits);
    let mut slot = 0usize;
    for _ in 0..n_gates {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let mut wires = vec![rng.random_range(0..n_qubits)];
        if kind.arity() == 2 {
            loop {
                let w = rng.random_range(0..n_qubits);
                if w != wires[0] {
                    wires.push(w);
                    break;
                }
            }
        }
        let params: Vec<Param> = (0..kind.n_params())
            .map(|_| {
                slot += 1;
                Param::Slot(slot - 1)
            })
            .collect();
        circuit.push(Gate::new(kind, wires, params).expect("valid random gate")).expect("in range");
    }
    let values = (0..slot)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    (circuit, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let text = "H 0\nCU3 0,1 @4,@5,@6\nRY 2 0.5\nRZZ 1,2 @0\nU3 3 @1,@2,@3\n";
        let c = Circuit::from_text(text, None).unwrap();
        assert_eq!(c.n_qubits, 4);
        assert_eq!(c.n_params, 7);
        assert_eq!(c.to_text(), text);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let c = Circuit::from_text("# header\n\nX 0  # flip\n", None).unwrap();
        assert_eq!(c.gates.len(), 1);
    }

    #[test]
    fn unreferenced_slot_rejected() {
        // slot 3 referenced, slots 0..2 never appear
        assert!(Circuit::from_text("RY 0 @3\n", None).is_err());
    }

    #[test]
    fn wire_out_of_range_rejected() {
        let mut c = Circuit::new(2);
        let g = Gate::fixed(GateKind::RY, vec![2], &[0.1]).unwrap();
        assert!(matches!(c.push(g), Err(Error::Wire(_))));
    }

    #[test]
    fn bind_freezes_slots() {
        let c = Circuit::from_text("RY 0 @0\nRZ 0 @1\n", None).unwrap();
        let b = c.bind(&[0.25, -1.0]).unwrap();
        assert!(b.is_bound());
        assert_eq!(b.gates[0].params[0], Param::Fixed(0.25));
    }
}
