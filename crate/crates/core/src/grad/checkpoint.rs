//! Structured-text checkpoints: circuit, parameters, optimizer state, step,
//! optional prune mask and free-form extra fields. Decimal values round-trip
//! bit-exactly (shortest round-trip formatting).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grad::optim::OptimizerState;
use crate::qstate::Circuit;
use crate::textio::{floats_line, key_value, parse_floats, parse_usize, split_sections};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub circuit: Circuit,
    pub params: Vec<f64>,
    pub opt: Option<OptimizerState>,
    pub step: u64,
    pub mask: Option<Vec<bool>>,
    pub extra: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(circuit: Circuit, params: Vec<f64>) -> Self {
        Checkpoint { circuit, params, opt: None, step: 0, mask: None, extra: BTreeMap::new() }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[meta]");
        let _ = writeln!(out, "step = {}", self.step);
        let _ = writeln!(out, "n_qubits = {}", self.circuit.n_qubits);
        let _ = writeln!(out, "[circuit]");
        out.push_str(&self.circuit.to_text());
        let _ = writeln!(out, "[params]");
        let _ = writeln!(out, "{}", floats_line(&self.params));
        if let Some(opt) = &self.opt {
            let _ = writeln!(out, "[adam]");
            let _ = writeln!(out, "step = {}", opt.step);
            let _ = writeln!(out, "m = {}", floats_line(&opt.m));
            let _ = writeln!(out, "v = {}", floats_line(&opt.v));
        }
        if let Some(mask) = &self.mask {
            let _ = writeln!(out, "[mask]");
            let bits: String = mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let _ = writeln!(out, "{bits}");
        }
        if !self.extra.is_empty() {
            let _ = writeln!(out, "[extra]");
            for (k, v) in &self.extra {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let sections = split_sections(text)?;
        let mut circuit_text = String::new();
        let mut n_qubits = None;
        let mut step = 0u64;
        let mut params = Vec::new();
        let mut opt: Option<OptimizerState> = None;
        let mut mask = None;
        let mut extra = BTreeMap::new();
        for s in &sections {
            match s.name.as_str() {
                "meta" => {
                    for line in &s.lines {
                        let (k, v) = key_value(line)?;
                        match k {
                            "step" => step = parse_usize(v)? as u64,
                            "n_qubits" => n_qubits = Some(parse_usize(v)?),
                            other => return Err(Error::Parse(format!("unknown meta field `{other}`"))),
                        }
                    }
                }
                "circuit" => {
                    circuit_text = s.lines.join("\n");
                }
                "params" => {
                    params = parse_floats(&s.lines.join(" "))?;
                }
                "adam" => {
                    let mut st = 0u64;
                    let mut m = Vec::new();
                    let mut v = Vec::new();
                    for line in &s.lines {
                        let (k, val) = key_value(line)?;
                        match k {
                            "step" => st = parse_usize(val)? as u64,
                            "m" => m = parse_floats(val)?,
                            "v" => v = parse_floats(val)?,
                            other => return Err(Error::Parse(format!("unknown adam field `{other}`"))),
                        }
                    }
                    opt = Some(OptimizerState { m, v, step: st });
                }
                "mask" => {
                    let bits = s.lines.join("");
                    mask = Some(
                        bits.chars()
                            .map(|ch| match ch {
                                '0' => Ok(false),
                                '1' => Ok(true),
                                other => Err(Error::Parse(format!("bad mask bit `{other}`"))),
                            })
                            .collect::<Result<Vec<bool>>>()?,
                    );
                }
                "extra" => {
                    for line in &s.lines {
                        let (k, v) = key_value(line)?;
                        extra.insert(k.to_string(), v.to_string());
                    }
                }
                other => return Err(Error::Parse(format!("unknown checkpoint section `{other}`"))),
            }
        }
        let circuit = Circuit::from_text(&circuit_text, n_qubits)?;
        if params.len() != circuit.n_params {
            return Err(Error::Validation(format!(
                "checkpoint has {} params but circuit declares {}",
                params.len(),
                circuit.n_params
            )));
        }
        if let Some(o) = &opt {
            if o.m.len() != params.len() || o.v.len() != params.len() {
                return Err(Error::Validation("optimizer state length mismatch".into()));
            }
        }
        Ok(Checkpoint { circuit, params, opt, step, mask, extra })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_text())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    Checkpoint::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{GateKind, Param};

    #[test]
    fn round_trips_bit_exactly() {
        let mut c = Circuit::new(3);
        c.push_gate(GateKind::U3, vec![0], vec![Param::Slot(0), Param::Slot(1), Param::Slot(2)])
            .unwrap();
        c.push_gate(GateKind::RZZ, vec![0, 2], vec![Param::Slot(3)]).unwrap();
        c.push_fixed(GateKind::RY, vec![1], &[0.1234567890123456789]).unwrap();
        let params = vec![0.1, -1.0 / 3.0, 2.0_f64.sqrt(), 1e-17];
        let mut ckpt = Checkpoint::new(c, params);
        ckpt.step = 42;
        ckpt.opt = Some(OptimizerState {
            m: vec![1e-300, -0.25, 0.1 + 0.2, f64::MIN_POSITIVE],
            v: vec![0.0, 1.0, 2.0, 3.0],
            step: 42,
        });
        ckpt.mask = Some(vec![true, false, false, true]);
        ckpt.extra.insert("space".into(), "u3cu3".into());

        let parsed = Checkpoint::from_text(&ckpt.to_text()).unwrap();
        assert_eq!(parsed, ckpt);
        // serialize → parse → serialize is a fixed point
        assert_eq!(parsed.to_text(), ckpt.to_text());
    }

    #[test]
    fn param_count_mismatch_rejected() {
        let text = "[meta]\nn_qubits = 1\n[circuit]\nRY 0 @0\n[params]\n0.5 0.25\n";
        assert!(matches!(Checkpoint::from_text(text), Err(Error::Validation(_))));
    }
}
