//! Design spaces, SuperCircuit construction and training, and front /
//! restricted SubCircuit sampling.
//!
//! A SuperCircuit is the largest circuit of a space: `n_blocks` blocks of
//! fixed layer templates (1-qubit layers put one gate per qubit, 2-qubit
//! layers connect the ring `(i, i+1 mod n)`). A SubCircuit keeps the first
//! `n_blocks_active` blocks and, inside each layer, the first `width` gates;
//! its parameter slots alias the SuperCircuit's shared store.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grad::{
    adam_step_masked, init_params, lr_schedule, param_shift_grad, Checkpoint, Loss,
    OptimizerState, TrainConfig,
};
use crate::qstate::{Circuit, Gate, GateKind, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    U3Cu3,
    ZzRy,
    Rxyz,
    ZxXx,
    RxyzU1Cu3,
    IbmqBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerTemplate {
    pub kind: GateKind,
    pub ring: bool,
}

const fn l1(kind: GateKind) -> LayerTemplate {
    LayerTemplate { kind, ring: false }
}

const fn l2(kind: GateKind) -> LayerTemplate {
    LayerTemplate { kind, ring: true }
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::U3Cu3 => "u3cu3",
            SpaceKind::ZzRy => "zzry",
            SpaceKind::Rxyz => "rxyz",
            SpaceKind::ZxXx => "zxxx",
            SpaceKind::RxyzU1Cu3 => "rxyzu1cu3",
            SpaceKind::IbmqBasis => "ibmqbasis",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let canon: String = name.to_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        Ok(match canon.as_str() {
            "u3cu3" => SpaceKind::U3Cu3,
            "zzry" => SpaceKind::ZzRy,
            "rxyz" => SpaceKind::Rxyz,
            "zxxx" => SpaceKind::ZxXx,
            "rxyzu1cu3" => SpaceKind::RxyzU1Cu3,
            "ibmqbasis" => SpaceKind::IbmqBasis,
            other => return Err(Error::Validation(format!("unknown design space `{other}`"))),
        })
    }

    pub fn default_blocks(self) -> usize {
        match self {
            SpaceKind::RxyzU1Cu3 => 4,
            SpaceKind::IbmqBasis => 20,
            _ => 8,
        }
    }

    pub fn block_template(self) -> Vec<LayerTemplate> {
        use GateKind::*;
        match self {
            SpaceKind::U3Cu3 => vec![l1(U3), l2(CU3)],
            SpaceKind::ZzRy => vec![l2(RZZ), l1(RY)],
            SpaceKind::Rxyz => vec![l1(RX), l1(RY), l1(RZ), l2(CZ)],
            SpaceKind::ZxXx => vec![l2(RZX), l2(RXX)],
            SpaceKind::RxyzU1Cu3 => vec![
                l1(RX),
                l1(S),
                l2(CNOT),
                l1(RY),
                l1(T),
                l2(SWAP),
                l1(RZ),
                l1(H),
                l2(SQSWAP),
                l1(U1),
                l2(CU3),
            ],
            SpaceKind::IbmqBasis => vec![l1(RZ), l1(X), l1(RZ), l1(SX), l1(RZ), l2(CNOT)],
        }
    }

    pub fn prefix_template(self) -> Vec<LayerTemplate> {
        match self {
            SpaceKind::Rxyz => vec![l1(GateKind::SH)],
            _ => vec![],
        }
    }

    pub fn front_sampling(self) -> bool {
        !matches!(self, SpaceKind::IbmqBasis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignSpace {
    pub kind: SpaceKind,
    pub n_qubits: usize,
    pub n_blocks: usize,
}

impl DesignSpace {
    pub fn new(kind: SpaceKind, n_qubits: usize) -> Self {
        DesignSpace { kind, n_qubits, n_blocks: kind.default_blocks() }
    }

    pub fn with_blocks(mut self, n_blocks: usize) -> Self {
        self.n_blocks = n_blocks;
        self
    }

    pub fn layers_per_block(&self) -> usize {
        self.kind.block_template().len()
    }

    /// Gates per layer (both 1q and ring layers hold one gate per qubit).
    pub fn layer_capacity(&self) -> usize {
        self.n_qubits
    }
}

/// Number of SubCircuits by the width-per-layer counting convention
/// (`capacity` choices per layer over every block).
pub fn space_cardinality(space: &DesignSpace) -> Result<BigUint> {
    if !space.kind.front_sampling() {
        return Err(Error::Unsupported(format!(
            "{} is not a front-sampling space",
            space.kind.name()
        )));
    }
    Ok(cardinality_parts(space.layer_capacity(), space.layers_per_block(), space.n_blocks))
}

pub fn cardinality_parts(capacity: usize, layers_per_block: usize, n_blocks: usize) -> BigUint {
    BigUint::from(capacity).pow((layers_per_block * n_blocks) as u32)
}

/// Per-layer widths plus the active block count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubCircuitSpec {
    pub n_blocks_active: usize,
    /// `widths[block][layer]`, kept for every block (inactive ones are
    /// latent so genes have a fixed shape)
    pub widths: Vec<Vec<usize>>,
}

impl SubCircuitSpec {
    pub fn full(space: &DesignSpace) -> Self {
        SubCircuitSpec {
            n_blocks_active: space.n_blocks,
            widths: vec![vec![space.layer_capacity(); space.layers_per_block()]; space.n_blocks],
        }
    }

    pub fn validate(&self, space: &DesignSpace) -> Result<()> {
        if self.n_blocks_active == 0 || self.n_blocks_active > space.n_blocks {
            return Err(Error::Spec(format!(
                "active blocks {} outside 1..={}",
                self.n_blocks_active, space.n_blocks
            )));
        }
        if self.widths.len() != space.n_blocks {
            return Err(Error::Spec("width table must cover every block".into()));
        }
        for row in &self.widths {
            if row.len() != space.layers_per_block() {
                return Err(Error::Spec("width table row length mismatch".into()));
            }
            if row.iter().any(|&w| w > space.layer_capacity()) {
                return Err(Error::Spec("width exceeds layer capacity".into()));
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let widths: Vec<String> =
            self.widths.iter().flatten().map(|w| w.to_string()).collect();
        format!("blocks={}; widths={}", self.n_blocks_active, widths.join(","))
    }

    pub fn parse(text: &str, space: &DesignSpace) -> Result<Self> {
        let mut blocks = None;
        let mut widths_flat = None;
        for part in text.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad spec field `{part}`")))?;
            match k.trim() {
                "blocks" => blocks = Some(crate::textio::parse_usize(v.trim())?),
                "widths" => {
                    widths_flat = Some(
                        v.split(',')
                            .map(|w| crate::textio::parse_usize(w.trim()))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                other => return Err(Error::Parse(format!("unknown spec field `{other}`"))),
            }
        }
        let flat = widths_flat.ok_or_else(|| Error::Parse("spec missing widths".into()))?;
        let lpb = space.layers_per_block();
        if flat.len() != lpb * space.n_blocks {
            return Err(Error::Parse(format!(
                "expected {} widths, got {}",
                lpb * space.n_blocks,
                flat.len()
            )));
        }
        let spec = SubCircuitSpec {
            n_blocks_active: blocks.ok_or_else(|| Error::Parse("spec missing blocks".into()))?,
            widths: flat.chunks(lpb).map(|c| c.to_vec()).collect(),
        };
        spec.validate(space)?;
        Ok(spec)
    }
}

/// Layer-difference count between two specs: layers of blocks active in
/// exactly one spec all count; layers of blocks active in both count when
/// their widths differ.
pub fn layer_diff(a: &SubCircuitSpec, b: &SubCircuitSpec) -> usize {
    let mut diff = 0;
    for blk in 0..a.widths.len().max(b.widths.len()) {
        let act_a = blk < a.n_blocks_active;
        let act_b = blk < b.n_blocks_active;
        let layers = a.widths.first().map_or(0, Vec::len);
        if act_a != act_b {
            diff += layers;
        } else if act_a && act_b {
            diff += a.widths[blk]
                .iter()
                .zip(&b.widths[blk])
                .filter(|(x, y)| x != y)
                .count();
        }
    }
    diff
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub max_layer_diff: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { max_layer_diff: 7 }
    }
}

/// The trained weight-sharing circuit plus its sampling configuration.
#[derive(Debug, Clone)]
pub struct SuperCircuit {
    pub space: DesignSpace,
    pub circuit: Circuit,
    pub params: Vec<f64>,
    pub sampling: SamplingConfig,
    /// `gate_index[block][layer][pos]` → index into `circuit.gates`
    gate_index: Vec<Vec<Vec<usize>>>,
    prefix_gates: Vec<usize>,
}

/// Build the full circuit of a design space with one shared parameter slot
/// per gate angle, ordered block-major, layer-major, position-major.
pub fn build_supercircuit(space: DesignSpace) -> Result<SuperCircuit> {
    let n = space.n_qubits;
    if n < 2 {
        return Err(Error::Validation("design spaces need at least 2 qubits".into()));
    }
    let mut circuit = Circuit::new(n);
    let mut slot = 0usize;
    let mut push = |circuit: &mut Circuit, tpl: LayerTemplate, pos: usize| -> Result<usize> {
        let wires = if tpl.ring { vec![pos, (pos + 1) % n] } else { vec![pos] };
        let params: Vec<Param> = (0..tpl.kind.n_params())
            .map(|_| {
                slot += 1;
                Param::Slot(slot - 1)
            })
            .collect();
        circuit.push(Gate::new(tpl.kind, wires, params)?)?;
        Ok(circuit.gates.len() - 1)
    };

    let mut prefix_gates = Vec::new();
    for tpl in space.kind.prefix_template() {
        for pos in 0..n {
            prefix_gates.push(push(&mut circuit, tpl, pos)?);
        }
    }
    let template = space.kind.block_template();
    let mut gate_index = Vec::with_capacity(space.n_blocks);
    for _ in 0..space.n_blocks {
        let mut block = Vec::with_capacity(template.len());
        for tpl in &template {
            let mut layer = Vec::with_capacity(n);
            for pos in 0..n {
                layer.push(push(&mut circuit, *tpl, pos)?);
            }
            block.push(layer);
        }
        gate_index.push(block);
    }
    let params = vec![0.0; circuit.n_params];
    Ok(SuperCircuit {
        space,
        circuit,
        params,
        sampling: SamplingConfig::default(),
        gate_index,
        prefix_gates,
    })
}

/// A SubCircuit with compact local slots aliasing the SuperCircuit store.
#[derive(Debug, Clone)]
pub struct SubCircuitView {
    pub circuit: Circuit,
    /// local slot → SuperCircuit slot
    pub slots: Vec<usize>,
}

impl SubCircuitView {
    pub fn gather(&self, super_params: &[f64]) -> Vec<f64> {
        self.slots.iter().map(|&s| super_params[s]).collect()
    }

    pub fn scatter(&self, local: &[f64], super_params: &mut [f64]) {
        for (&slot, &v) in self.slots.iter().zip(local) {
            super_params[slot] = v;
        }
    }
}

impl SuperCircuit {
    /// Uniform front sample: depth in `[lower_bound, n_blocks]`, every layer
    /// width in `[1, capacity]`.
    pub fn sample_front(&self, lower_bound: usize, rng: &mut ChaCha8Rng) -> Result<SubCircuitSpec> {
        if !self.space.kind.front_sampling() {
            return Err(Error::Unsupported(format!(
                "{} has front sampling disabled",
                self.space.kind.name()
            )));
        }
        let lb = lower_bound.clamp(1, self.space.n_blocks);
        let depth = rng.random_range(lb..=self.space.n_blocks);
        let widths = (0..self.space.n_blocks)
            .map(|_| {
                (0..self.space.layers_per_block())
                    .map(|_| rng.random_range(1..=self.space.layer_capacity()))
                    .collect()
            })
            .collect();
        Ok(SubCircuitSpec { n_blocks_active: depth, widths })
    }

    /// Front sample constrained to differ from `prev` in at most
    /// `max_layer_diff` layers: rejection sampling with a bounded attempt
    /// budget, then a minimal perturbation of `prev`.
    pub fn sample_restricted(
        &self,
        prev: &SubCircuitSpec,
        lower_bound: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<SubCircuitSpec> {
        let limit = self.sampling.max_layer_diff;
        if limit == 0 {
            return Ok(prev.clone());
        }
        for _ in 0..1000 {
            let cand = self.sample_front(lower_bound, rng)?;
            if layer_diff(&cand, prev) <= limit {
                return Ok(cand);
            }
        }
        // fallback: resample up to `limit` layers of prev's active blocks
        let mut out = prev.clone();
        let mut positions: Vec<(usize, usize)> = (0..prev.n_blocks_active)
            .flat_map(|b| (0..self.space.layers_per_block()).map(move |l| (b, l)))
            .collect();
        positions.shuffle(rng);
        for &(b, l) in positions.iter().take(limit) {
            out.widths[b][l] = rng.random_range(1..=self.space.layer_capacity());
        }
        Ok(out)
    }

    /// Materialize a spec as a circuit whose local slots alias this
    /// SuperCircuit's parameter store.
    pub fn instantiate(&self, spec: &SubCircuitSpec) -> Result<SubCircuitView> {
        spec.validate(&self.space)?;
        let mut circuit = Circuit::new(self.space.n_qubits);
        let mut slots = Vec::new();
        let mut remap = vec![usize::MAX; self.circuit.n_params];
        let mut add = |circuit: &mut Circuit, gate_idx: usize| -> Result<()> {
            let gate = &self.circuit.gates[gate_idx];
            let params: Vec<Param> = gate
                .params
                .iter()
                .map(|p| match *p {
                    Param::Fixed(a) => Param::Fixed(a),
                    Param::Slot(global) => {
                        if remap[global] == usize::MAX {
                            remap[global] = slots.len();
                            slots.push(global);
                        }
                        Param::Slot(remap[global])
                    }
                })
                .collect();
            circuit.push(Gate::new(gate.kind, gate.wires.clone(), params)?)
        };
        for &g in &self.prefix_gates {
            add(&mut circuit, g)?;
        }
        for (b, block) in self.gate_index.iter().enumerate().take(spec.n_blocks_active) {
            for (l, layer) in block.iter().enumerate() {
                for &g in layer.iter().take(spec.widths[b][l]) {
                    add(&mut circuit, g)?;
                }
            }
        }
        Ok(SubCircuitView { circuit, slots })
    }
}

/// Linear block lower-bound schedule: starts at `n_blocks`, reaches 1 at the
/// midpoint of training, constant afterwards.
pub fn block_lower_bound(step: u64, total: u64, n_blocks: usize) -> usize {
    if n_blocks <= 1 || total == 0 {
        return 1;
    }
    let half = (total as f64) / 2.0;
    let progress = (step as f64 / half).min(1.0);
    let lb = n_blocks as f64 - progress * (n_blocks as f64 - 1.0);
    lb.round().clamp(1.0, n_blocks as f64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperStepRecord {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub lower_bound: usize,
    pub layer_diff: usize,
    pub spec: String,
}

#[derive(Debug, Clone, Default)]
pub struct SuperTrainLog {
    pub history: Vec<SuperStepRecord>,
}

/// One SuperCircuit training run: per step, sample a restricted SubCircuit,
/// compute gradients through it and update only the sampled slots.
pub fn train_supercircuit<L: Loss>(
    sc: &mut SuperCircuit,
    loss: &L,
    cfg: &TrainConfig,
) -> Result<SuperTrainLog> {
    let n_samples = loss.n_samples().max(1);
    let batch_size = cfg.batch_size.clamp(1, n_samples);
    let steps_per_epoch = n_samples.div_ceil(batch_size) as u64;
    let total = cfg.epochs as u64 * steps_per_epoch;
    cfg.validate(total)?;

    sc.params = init_params(sc.circuit.n_params, cfg.seed);
    let mut opt = OptimizerState::new(sc.circuit.n_params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut log = SuperTrainLog::default();
    let mut prev: Option<SubCircuitSpec> = None;
    let mut ids: Vec<usize> = (0..n_samples).collect();
    let mut step = 0u64;

    for _epoch in 0..cfg.epochs {
        ids.shuffle(&mut shuffle_rng);
        for batch in ids.chunks(batch_size) {
            let lb = block_lower_bound(step, total, sc.space.n_blocks);
            let spec = if !sc.space.kind.front_sampling() {
                SubCircuitSpec::full(&sc.space)
            } else {
                match &prev {
                    None => sc.sample_front(lb, &mut sample_rng)?,
                    Some(p) => sc.sample_restricted(p, lb, &mut sample_rng)?,
                }
            };
            let diff = prev.as_ref().map_or(0, |p| layer_diff(&spec, p));
            let view = sc.instantiate(&spec)?;
            let local = view.gather(&sc.params);
            let (loss_value, local_grads) = param_shift_grad(loss, &view.circuit, &local, batch)?;
            let mut global_grads = vec![0.0; sc.circuit.n_params];
            for (i, &slot) in view.slots.iter().enumerate() {
                global_grads[slot] = local_grads[i];
            }
            let lr = lr_schedule(step, total, cfg);
            adam_step_masked(&mut opt, &mut sc.params, &global_grads, cfg, lr, &view.slots)?;
            log.history.push(SuperStepRecord {
                step,
                lr,
                loss: loss_value,
                lower_bound: lb,
                layer_diff: diff,
                spec: spec.serialize(),
            });
            prev = Some(spec);
            step += 1;
        }
    }
    Ok(log)
}

/// Checkpoint a SuperCircuit (space descriptor in the extra fields).
pub fn supercircuit_checkpoint(sc: &SuperCircuit, step: u64) -> Checkpoint {
    let mut ckpt = Checkpoint::new(sc.circuit.clone(), sc.params.clone());
    ckpt.step = step;
    ckpt.extra.insert("space".into(), sc.space.kind.name().into());
    ckpt.extra.insert("n_qubits".into(), sc.space.n_qubits.to_string());
    ckpt.extra.insert("n_blocks".into(), sc.space.n_blocks.to_string());
    ckpt.extra.insert("max_layer_diff".into(), sc.sampling.max_layer_diff.to_string());
    ckpt
}

/// Rebuild a SuperCircuit from a checkpoint written by
/// [`supercircuit_checkpoint`].
pub fn supercircuit_from_checkpoint(ckpt: &Checkpoint) -> Result<SuperCircuit> {
    let get = |key: &str| {
        ckpt.extra
            .get(key)
            .ok_or_else(|| Error::Parse(format!("checkpoint missing `{key}` field")))
    };
    let kind = SpaceKind::parse(get("space")?)?;
    let n_qubits = crate::textio::parse_usize(get("n_qubits")?)?;
    let n_blocks = crate::textio::parse_usize(get("n_blocks")?)?;
    let space = DesignSpace::new(kind, n_qubits).with_blocks(n_blocks);
    let mut sc = build_supercircuit(space)?;
    if let Some(mld) = ckpt.extra.get("max_layer_diff") {
        sc.sampling.max_layer_diff = crate::textio::parse_usize(mld)?;
    }
    if sc.circuit.to_text() != ckpt.circuit.to_text() {
        return Err(Error::Validation(
            "checkpoint circuit does not match the declared design space".into(),
        ));
    }
    if ckpt.params.len() != sc.circuit.n_params {
        return Err(Error::Validation("checkpoint parameter count mismatch".into()));
    }
    sc.params = ckpt.params.clone();
    Ok(sc)
}
