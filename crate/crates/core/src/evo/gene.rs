//! Gene encoding and the mutation / crossover / repair operators.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::noise::DeviceModel;
use crate::qcompile::QubitMapping;
use crate::space::{DesignSpace, SubCircuitSpec, SuperCircuit};

/// Circuit sub-gene (per-layer widths plus a depth value) concatenated with
/// the logical→physical mapping sub-gene.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gene {
    /// flattened widths, block-major then layer
    pub widths: Vec<usize>,
    /// active block count
    pub depth: usize,
    /// physical qubit per logical qubit
    pub mapping: Vec<usize>,
}

/// Value ranges for each gene element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneDomain {
    pub n_blocks: usize,
    pub layers_per_block: usize,
    pub capacity: usize,
    pub n_logical: usize,
    pub n_physical: usize,
}

impl GeneDomain {
    pub fn of(sc: &SuperCircuit, device: &DeviceModel) -> Self {
        GeneDomain {
            n_blocks: sc.space.n_blocks,
            layers_per_block: sc.space.layers_per_block(),
            capacity: sc.space.layer_capacity(),
            n_logical: sc.space.n_qubits,
            n_physical: device.n_physical,
        }
    }

    fn width_len(&self) -> usize {
        self.n_blocks * self.layers_per_block
    }
}

impl Gene {
    pub fn to_spec(&self, space: &DesignSpace) -> Result<SubCircuitSpec> {
        let lpb = space.layers_per_block();
        if self.widths.len() != lpb * space.n_blocks {
            return Err(Error::Spec(format!(
                "gene has {} width entries, space needs {}",
                self.widths.len(),
                lpb * space.n_blocks
            )));
        }
        let spec = SubCircuitSpec {
            n_blocks_active: self.depth,
            widths: self.widths.chunks(lpb).map(|c| c.to_vec()).collect(),
        };
        spec.validate(space)?;
        Ok(spec)
    }

    pub fn to_mapping(&self, n_physical: usize) -> Result<QubitMapping> {
        QubitMapping::new(self.mapping.clone(), n_physical)
    }

    pub fn serialize(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let mapping: Vec<String> = self.mapping.iter().map(|m| m.to_string()).collect();
        format!("depth={}; widths={}; mapping={}", self.depth, widths.join(","), mapping.join(","))
    }

    pub fn parse(text: &str) -> Result<Gene> {
        let mut depth = None;
        let mut widths = None;
        let mut mapping = None;
        for part in text.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad gene field `{part}`")))?;
            let list = |v: &str| -> Result<Vec<usize>> {
                v.split(',').map(|x| crate::textio::parse_usize(x.trim())).collect()
            };
            match k.trim() {
                "depth" => depth = Some(crate::textio::parse_usize(v.trim())?),
                "widths" => widths = Some(list(v)?),
                "mapping" => mapping = Some(list(v)?),
                other => return Err(Error::Parse(format!("unknown gene field `{other}`"))),
            }
        }
        Ok(Gene {
            widths: widths.ok_or_else(|| Error::Parse("gene missing widths".into()))?,
            depth: depth.ok_or_else(|| Error::Parse("gene missing depth".into()))?,
            mapping: mapping.ok_or_else(|| Error::Parse("gene missing mapping".into()))?,
        })
    }
}

/// Make a mapping sub-gene injective: keep the first occurrence of each
/// value; replace each later duplicate with the smallest physical index not
/// present anywhere in the sequence, scanning left to right.
pub fn repair_mapping(mapping: &[usize], n_physical: usize) -> Result<Vec<usize>> {
    if mapping.len() > n_physical {
        return Err(Error::Infeasible(format!(
            "{} logical qubits cannot map onto {n_physical} physical qubits",
            mapping.len()
        )));
    }
    if let Some(&bad) = mapping.iter().find(|&&p| p >= n_physical) {
        return Err(Error::Validation(format!("mapping value {bad} outside device")));
    }
    let mut used = vec![false; n_physical];
    let mut first = vec![false; mapping.len()];
    for (i, &p) in mapping.iter().enumerate() {
        if !used[p] {
            used[p] = true;
            first[i] = true;
        }
    }
    let mut out = mapping.to_vec();
    for (i, keep) in first.iter().enumerate() {
        if !keep {
            let free = used
                .iter()
                .position(|&u| !u)
                .expect("len ≤ n_physical guarantees a free qubit");
            out[i] = free;
            used[free] = true;
        }
    }
    Ok(out)
}

pub fn random_gene(domain: &GeneDomain, rng: &mut ChaCha8Rng) -> Result<Gene> {
    let widths =
        (0..domain.width_len()).map(|_| rng.random_range(1..=domain.capacity)).collect();
    let depth = rng.random_range(1..=domain.n_blocks);
    // uniform random injective assignment via a partial shuffle
    let mut phys: Vec<usize> = (0..domain.n_physical).collect();
    for i in 0..domain.n_logical {
        let j = rng.random_range(i..phys.len());
        phys.swap(i, j);
    }
    phys.truncate(domain.n_logical);
    if domain.n_logical > domain.n_physical {
        return Err(Error::Infeasible("more logical than physical qubits".into()));
    }
    Ok(Gene { widths, depth, mapping: phys })
}

/// Resample each gene element with probability `prob`, then repair the
/// mapping to injectivity.
pub fn mutate(gene: &Gene, domain: &GeneDomain, prob: f64, rng: &mut ChaCha8Rng) -> Result<Gene> {
    let mut out = gene.clone();
    for w in &mut out.widths {
        if rng.random::<f64>() < prob {
            *w = rng.random_range(1..=domain.capacity);
        }
    }
    if rng.random::<f64>() < prob {
        out.depth = rng.random_range(1..=domain.n_blocks);
    }
    for m in &mut out.mapping {
        if rng.random::<f64>() < prob {
            *m = rng.random_range(0..domain.n_physical);
        }
    }
    out.mapping = repair_mapping(&out.mapping, domain.n_physical)?;
    Ok(out)
}

/// Element-wise uniform pick from the two parents, then repair.
pub fn crossover(a: &Gene, b: &Gene, domain: &GeneDomain, rng: &mut ChaCha8Rng) -> Result<Gene> {
    if a.widths.len() != b.widths.len() || a.mapping.len() != b.mapping.len() {
        return Err(Error::Validation("crossover parents have different shapes".into()));
    }
    let pick = |rng: &mut ChaCha8Rng, x: usize, y: usize| if rng.random::<f64>() < 0.5 { x } else { y };
    let widths = a.widths.iter().zip(&b.widths).map(|(&x, &y)| pick(rng, x, y)).collect();
    let depth = pick(rng, a.depth, b.depth);
    let mapping: Vec<usize> =
        a.mapping.iter().zip(&b.mapping).map(|(&x, &y)| pick(rng, x, y)).collect();
    Ok(Gene { widths, depth, mapping: repair_mapping(&mapping, domain.n_physical)? })
}
