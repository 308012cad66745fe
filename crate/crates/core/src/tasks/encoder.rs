//! Feature encoders: fixed rotation layers consuming input features in order.

use crate::error::{Error, Result};
use crate::qstate::{Gate, GateKind};

/// Ordered rotation layers, each `(kind, count)`; layer `ℓ` places feature
/// `i` on qubit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    pub layers: Vec<(GateKind, usize)>,
}

impl EncoderSpec {
    pub fn new(layers: Vec<(GateKind, usize)>) -> Result<Self> {
        for &(kind, _) in &layers {
            if !matches!(kind, GateKind::RX | GateKind::RY | GateKind::RZ) {
                return Err(Error::Validation(format!(
                    "encoder layers must be RX/RY/RZ rotations, got {}",
                    kind.name()
                )));
            }
        }
        Ok(EncoderSpec { layers })
    }

    /// Parse the compact form `4RY,4RZ,4RX,4RY`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let split = part
                .find(|c: char| c.is_ascii_alphabetic())
                .ok_or_else(|| Error::Parse(format!("bad encoder layer `{part}`")))?;
            let count: usize = part[..split]
                .parse()
                .map_err(|_| Error::Parse(format!("bad encoder layer count in `{part}`")))?;
            let kind = GateKind::from_name(&part[split..])
                .ok_or_else(|| Error::Parse(format!("bad encoder gate in `{part}`")))?;
            layers.push((kind, count));
        }
        Self::new(layers)
    }

    /// The MNIST 4×4 encoder.
    pub fn mnist4() -> Self {
        use GateKind::*;
        EncoderSpec { layers: vec![(RY, 4), (RZ, 4), (RX, 4), (RY, 4)] }
    }

    pub fn total_features(&self) -> usize {
        self.layers.iter().map(|&(_, c)| c).sum()
    }

    pub fn n_qubits(&self) -> usize {
        self.layers.iter().map(|&(_, c)| c).max().unwrap_or(0)
    }

    /// Fixed (non-trainable) rotation gates, angle = feature value.
    pub fn encode(&self, features: &[f64]) -> Result<Vec<Gate>> {
        if features.len() != self.total_features() {
            return Err(Error::Validation(format!(
                "encoder consumes {} features, got {}",
                self.total_features(),
                features.len()
            )));
        }
        let mut gates = Vec::with_capacity(features.len());
        let mut off = 0;
        for &(kind, count) in &self.layers {
            for i in 0..count {
                gates.push(Gate::fixed(kind, vec![i], &[features[off + i]])?);
            }
            off += count;
        }
        Ok(gates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::Param;

    #[test]
    fn mnist4_consumes_sixteen_features() {
        let spec = EncoderSpec::mnist4();
        assert_eq!(spec.total_features(), 16);
        assert_eq!(spec.n_qubits(), 4);
        let features: Vec<f64> = (0..16).map(|i| i as f64 / 10.0).collect();
        let gates = spec.encode(&features).unwrap();
        assert_eq!(gates.len(), 16);
        // layer ℓ feature i lands on qubit i
        assert_eq!(gates[0].wires, vec![0]);
        assert_eq!(gates[5].wires, vec![1]);
        assert_eq!(gates[5].kind, GateKind::RZ);
        assert_eq!(gates[5].params[0], Param::Fixed(0.5));
    }

    #[test]
    fn zero_features_give_identity_rotations() {
        let spec = EncoderSpec::parse("2RY,2RX").unwrap();
        let gates = spec.encode(&[0.0; 4]).unwrap();
        for g in gates {
            assert_eq!(g.params[0], Param::Fixed(0.0));
        }
    }

    #[test]
    fn parse_round_trip_shape() {
        let spec = EncoderSpec::parse("4RY,4RZ,4RX,4RY").unwrap();
        assert_eq!(spec, EncoderSpec::mnist4());
        assert!(EncoderSpec::parse("4H").is_err());
        assert!(EncoderSpec::parse("xRY").is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = EncoderSpec::mnist4();
        assert!(spec.encode(&[0.0; 15]).is_err());
    }
}
