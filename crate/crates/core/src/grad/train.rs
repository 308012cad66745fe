//! The shared training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grad::optim::{adam_step, lr_schedule, OptimizerState, TrainConfig};
use crate::grad::shift::{batch_loss, param_shift_grad, Loss};
use crate::qstate::Circuit;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: Vec<f64>,
    pub history: Vec<StepRecord>,
    /// `(step, validation loss)` at each epoch end, when a validation loss
    /// was supplied.
    pub valid_history: Vec<(u64, f64)>,
    pub best_valid: Option<f64>,
    pub opt: OptimizerState,
}

/// Parameter initialization: uniform in [−π/36, π/36] (small angles near the
/// identity).
pub fn init_params(n: usize, seed: u64) -> Vec<f64> {
    use rand::RngExt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = std::f64::consts::PI / 36.0;
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Train from a fresh seeded initialization.
pub fn train<L: Loss + ?Sized>(
    circuit: &Circuit,
    loss: &L,
    valid: Option<&L>,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    let init = init_params(circuit.n_params, cfg.seed);
    train_from(circuit, loss, valid, cfg, init)
}

/// Train from the given parameters. With a validation loss the best-validation
/// parameters are returned; otherwise the final ones.
pub fn train_from<L: Loss + ?Sized>(
    circuit: &Circuit,
    loss: &L,
    valid: Option<&L>,
    cfg: &TrainConfig,
    init: Vec<f64>,
) -> Result<TrainResult> {
    let n_samples = loss.n_samples().max(1);
    let batch_size = cfg.batch_size.clamp(1, n_samples);
    let steps_per_epoch = n_samples.div_ceil(batch_size) as u64;
    let total = cfg.epochs as u64 * steps_per_epoch;
    cfg.validate(total)?;

    let mut params = init;
    let mut opt = OptimizerState::new(circuit.n_params);
    let mut history = Vec::new();
    let mut valid_history = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let valid_ids: Vec<usize> = valid.map(|v| (0..v.n_samples()).collect()).unwrap_or_default();

    let mut step = 0u64;
    let mut ids: Vec<usize> = (0..n_samples).collect();
    for _epoch in 0..cfg.epochs {
        ids.shuffle(&mut rng);
        for batch in ids.chunks(batch_size) {
            let lr = lr_schedule(step, total, cfg);
            let (loss_value, grads) = param_shift_grad(loss, circuit, &params, batch)?;
            adam_step(&mut opt, &mut params, &grads, cfg, lr)?;
            history.push(StepRecord { step, lr, loss: loss_value });
            step += 1;
        }
        if let Some(v) = valid {
            let vl = batch_loss(v, circuit, &params, &valid_ids)?;
            valid_history.push((step, vl));
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, params.clone()));
            }
        }
    }

    let (best_valid, params) = match best {
        Some((b, p)) => (Some(b), p),
        None => (None, params),
    };
    Ok(TrainResult { params, history, valid_history, best_valid, opt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::shift::Loss;
    use crate::qstate::{run_circuit, GateKind, Param, PauliString, RunMode};
    use std::borrow::Cow;

    struct ZLoss;
    impl Loss for ZLoss {
        fn n_samples(&self) -> usize {
            1
        }
        fn prepare<'a>(&self, ansatz: &'a Circuit, _s: usize) -> Result<Cow<'a, Circuit>> {
            Ok(Cow::Borrowed(ansatz))
        }
        fn expectations(&self, prepared: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
            let st = run_circuit(prepared, params, RunMode::Dynamic)?;
            Ok(vec![crate::qstate::expectation(&st, &PauliString::z(0))])
        }
        fn loss_from(&self, evs: &[f64], _s: usize) -> f64 {
            evs[0]
        }
        fn dloss_dev(&self, _evs: &[f64], _s: usize) -> Vec<f64> {
            vec![1.0]
        }
    }

    fn ry_ansatz() -> Circuit {
        let mut c = Circuit::new(1);
        c.push_gate(GateKind::RY, vec![0], vec![Param::Slot(0)]).unwrap();
        c
    }

    #[test]
    fn minimizes_z_expectation_to_ground() {
        // min ⟨Z⟩ over RY(θ)|0⟩ is −1 at θ = π
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 1,
            warmup_steps: 10,
            weight_decay: 0.0,
            lr0: 0.05,
            seed: 3,
            ..Default::default()
        };
        let r = train(&ry_ansatz(), &ZLoss, None, &cfg).unwrap();
        let final_loss = r.history.last().unwrap().loss;
        assert!((final_loss + 1.0).abs() < 1e-3, "loss {final_loss}");
    }

    #[test]
    fn zero_epochs_leaves_params_at_init() {
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let r = train(&ry_ansatz(), &ZLoss, None, &cfg).unwrap();
        assert_eq!(r.params, init_params(1, cfg.seed));
        assert!(r.history.is_empty());
    }

    #[test]
    fn histories_are_bit_identical_across_reruns() {
        let cfg = TrainConfig { epochs: 20, batch_size: 1, seed: 9, ..Default::default() };
        let a = train(&ry_ansatz(), &ZLoss, None, &cfg).unwrap();
        let b = train(&ry_ansatz(), &ZLoss, None, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }
}
