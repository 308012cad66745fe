//! Iterative magnitude pruning with polynomial ratio decay and interleaved
//! finetuning. Pruned slots are pinned to exact 0.0 so the compiler's
//! zero-pattern shortcuts fire.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grad::{
    adam_step_masked, lr_schedule, param_shift_grad, Loss, OptimizerState, StepRecord, TrainConfig,
};
use crate::qcompile::normalize_angle;
use crate::qstate::Circuit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSchedule {
    pub r_initial: f64,
    pub r_final: f64,
    pub s_begin: u64,
    pub s_end: u64,
    pub total_steps: u64,
}

impl PruneSchedule {
    /// Pruning starts at step 0 and reaches `r_final` at half of the total
    /// finetune steps.
    pub fn new(r_initial: f64, r_final: f64, total_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_initial) || !(0.0..=1.0).contains(&r_final) {
            return Err(Error::Validation("pruning ratios must lie in [0,1]".into()));
        }
        if r_initial > r_final {
            return Err(Error::Validation(format!(
                "r_initial ({r_initial}) must not exceed r_final ({r_final})"
            )));
        }
        let s_end = (total_steps / 2).max(1);
        Ok(PruneSchedule { r_initial, r_final, s_begin: 0, s_end, total_steps })
    }
}

/// `r_now = r_final + (r_initial − r_final)·(1 − (s−s_begin)/(s_end−s_begin))³`
/// with `s` clamped to `[s_begin, s_end]`.
pub fn prune_ratio(s_now: u64, sched: &PruneSchedule) -> f64 {
    // the formula hits the endpoints exactly; return them without rounding
    if s_now <= sched.s_begin {
        return sched.r_initial;
    }
    if s_now >= sched.s_end {
        return sched.r_final;
    }
    let span = (sched.s_end - sched.s_begin).max(1) as f64;
    let progress = (s_now - sched.s_begin) as f64 / span;
    sched.r_final + (sched.r_initial - sched.r_final) * (1.0 - progress).powi(3)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    pub pruned: Vec<bool>,
}

impl PruneMask {
    pub fn empty(n: usize) -> Self {
        PruneMask { pruned: vec![false; n] }
    }

    pub fn count(&self) -> usize {
        self.pruned.iter().filter(|&&p| p).count()
    }

    pub fn active_slots(&self) -> Vec<usize> {
        (0..self.pruned.len()).filter(|&i| !self.pruned[i]).collect()
    }

    pub fn apply(&self, params: &mut [f64]) {
        for (p, &m) in params.iter_mut().zip(&self.pruned) {
            if m {
                *p = 0.0;
            }
        }
    }
}

/// Extend `prev` so that `⌊ratio·n⌋` slots are pruned: angles are normalized
/// to [−π, π) and the smallest magnitudes go first (ties to the lower slot
/// index). Masks are monotone: previously pruned slots stay pruned.
pub fn select_mask(params: &[f64], ratio: f64, prev: &PruneMask) -> PruneMask {
    let n = params.len();
    let target = (ratio.clamp(0.0, 1.0) * n as f64).floor() as usize;
    let mut mask = prev.clone();
    let have = mask.count();
    if target <= have {
        return mask;
    }
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .filter(|&i| !mask.pruned[i])
        .map(|i| (normalize_angle(params[i]).abs(), i))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, slot) in candidates.iter().take(target - have) {
        mask.pruned[slot] = true;
    }
    mask
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub params: Vec<f64>,
    pub mask: PruneMask,
    pub history: Vec<StepRecord>,
}

/// Finetune with per-step mask growth: update the target ratio, extend the
/// mask, pin pruned slots to exact zero and take one training step on the
/// active slots only. `init` should be parameters already trained to
/// convergence.
pub fn prune_finetune<L: Loss + ?Sized>(
    circuit: &Circuit,
    loss: &L,
    sched: &PruneSchedule,
    cfg: &TrainConfig,
    init: Vec<f64>,
) -> Result<PruneOutcome> {
    let n_samples = loss.n_samples().max(1);
    let batch_size = cfg.batch_size.clamp(1, n_samples);
    let steps_per_epoch = n_samples.div_ceil(batch_size) as u64;
    let total = cfg.epochs as u64 * steps_per_epoch;
    cfg.validate(total)?;
    if sched.total_steps != total {
        return Err(Error::Validation(format!(
            "schedule covers {} steps but the run has {total}",
            sched.total_steps
        )));
    }

    let mut params = init;
    let mut mask = PruneMask::empty(circuit.n_params);
    let mut opt = OptimizerState::new(circuit.n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut history = Vec::new();
    let mut ids: Vec<usize> = (0..n_samples).collect();
    let mut step = 0u64;

    for _epoch in 0..cfg.epochs {
        ids.shuffle(&mut rng);
        for batch in ids.chunks(batch_size) {
            let ratio = prune_ratio(step, sched);
            mask = select_mask(&params, ratio, &mask);
            mask.apply(&mut params);
            let (loss_value, mut grads) = param_shift_grad(loss, circuit, &params, batch)?;
            for (g, &m) in grads.iter_mut().zip(&mask.pruned) {
                if m {
                    *g = 0.0;
                }
            }
            let lr = lr_schedule(step, total, cfg);
            adam_step_masked(&mut opt, &mut params, &grads, cfg, lr, &mask.active_slots())?;
            mask.apply(&mut params);
            history.push(StepRecord { step, lr, loss: loss_value });
            step += 1;
        }
    }
    // the schedule reaches r_final at s_end ≤ total, so the final count is
    // exact even for zero-step runs
    if total == 0 {
        mask = select_mask(&params, sched.r_final, &mask);
        mask.apply(&mut params);
    }
    Ok(PruneOutcome { params, mask, history })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub ratio: f64,
    pub params: Vec<f64>,
    pub mask: PruneMask,
    /// noise-aware validation score, lower is better
    pub noisy_score: f64,
    /// noise-free metric, higher is better
    pub quality: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// index into `rows`, or None when every ratio degrades the noise-free
    /// metric and the unpruned circuit is kept
    pub selected: Option<usize>,
    pub unpruned_quality: f64,
}

/// Run `prune_finetune` for each final ratio and select the best noise-aware
/// score among those that do not degrade the noise-free metric versus the
/// unpruned circuit; fall back to the unpruned parameters otherwise.
pub fn sweep_ratios<L, N, Q>(
    circuit: &Circuit,
    loss: &L,
    ratios: &[f64],
    r_initial: f64,
    cfg: &TrainConfig,
    init: Vec<f64>,
    noisy_score: N,
    quality: Q,
) -> Result<SweepResult>
where
    L: Loss + ?Sized,
    N: Fn(&[f64]) -> Result<f64>,
    Q: Fn(&[f64]) -> Result<f64>,
{
    if ratios.is_empty() {
        return Err(Error::Validation("ratio sweep needs at least one ratio".into()));
    }
    let n_samples = loss.n_samples().max(1);
    let batch_size = cfg.batch_size.clamp(1, n_samples);
    let total = cfg.epochs as u64 * (n_samples.div_ceil(batch_size) as u64);
    let unpruned_quality = quality(&init)?;

    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let sched = PruneSchedule::new(r_initial.min(ratio), ratio, total)?;
        let outcome = prune_finetune(circuit, loss, &sched, cfg, init.clone())?;
        rows.push(SweepRow {
            ratio,
            noisy_score: noisy_score(&outcome.params)?,
            quality: quality(&outcome.params)?,
            params: outcome.params,
            mask: outcome.mask,
        });
    }
    let mut selected: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if row.quality + 1e-9 < unpruned_quality {
            continue;
        }
        match selected {
            None => selected = Some(i),
            Some(best) => {
                let better = row.noisy_score.total_cmp(&rows[best].noisy_score).is_lt();
                if better {
                    selected = Some(i);
                }
            }
        }
    }
    Ok(SweepResult { rows, selected, unpruned_quality })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::batch_loss;
    use crate::qstate::{GateKind, Param, PauliString};
    use std::borrow::Cow;

    #[test]
    fn ratio_formula_endpoints_and_midpoint() {
        let sched = PruneSchedule::new(0.05, 0.5, 200).unwrap();
        assert_eq!(sched.s_end, 100);
        assert!((prune_ratio(0, &sched) - 0.05).abs() < 1e-15);
        assert!((prune_ratio(100, &sched) - 0.5).abs() < 1e-15);
        assert!((prune_ratio(150, &sched) - 0.5).abs() < 1e-15);
        // midpoint: 0.5 + (0.05 − 0.5)·(0.5)³ = 0.443750
        assert!((prune_ratio(50, &sched) - 0.443750).abs() < 1e-12);
        // non-decreasing when r_final ≥ r_initial
        let mut last = 0.0;
        for s in 0..=120 {
            let r = prune_ratio(s, &sched);
            assert!(r >= last - 1e-15);
            last = r;
        }
    }

    #[test]
    fn mask_selection_normalizes_angles() {
        let params = [0.01, -3.0, 2.0 * std::f64::consts::PI + 0.005, 1.5];
        let mask = select_mask(&params, 0.5, &PruneMask::empty(4));
        assert_eq!(mask.pruned, vec![true, false, true, false]);

        assert_eq!(select_mask(&params, 0.0, &PruneMask::empty(4)).count(), 0);
        assert_eq!(select_mask(&params, 1.0, &PruneMask::empty(4)).count(), 4);
    }

    #[test]
    fn masks_are_monotone() {
        let params = [0.3, 0.01, 0.2, 0.4];
        let m1 = select_mask(&params, 0.25, &PruneMask::empty(4));
        assert_eq!(m1.count(), 1);
        // with changed params, the earlier choice stays pruned
        let changed = [0.001, 5.0, 5.0, 5.0];
        let m2 = select_mask(&changed, 0.5, &m1);
        assert!(m2.pruned[1], "slot 1 must stay pruned");
        assert_eq!(m2.count(), 2);
    }

    struct ZLoss;
    impl Loss for ZLoss {
        fn n_samples(&self) -> usize {
            1
        }
        fn prepare<'a>(&self, ansatz: &'a Circuit, _s: usize) -> Result<Cow<'a, Circuit>> {
            Ok(Cow::Borrowed(ansatz))
        }
        fn expectations(&self, prepared: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
            let st = crate::qstate::run_circuit(prepared, params, crate::qstate::RunMode::Dynamic)?;
            Ok(vec![crate::qstate::expectation(&st, &PauliString::z(0))])
        }
        fn loss_from(&self, evs: &[f64], _s: usize) -> f64 {
            evs[0]
        }
        fn dloss_dev(&self, _evs: &[f64], _s: usize) -> Vec<f64> {
            vec![1.0]
        }
    }

    fn redundant_ansatz() -> Circuit {
        // RZ does not affect ⟨Z⟩, so its slot is redundant
        let mut c = Circuit::new(1);
        c.push_gate(GateKind::RY, vec![0], vec![Param::Slot(0)]).unwrap();
        c.push_gate(GateKind::RZ, vec![0], vec![Param::Slot(1)]).unwrap();
        c
    }

    fn finetune_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 1,
            warmup_steps: 0,
            lr0: 0.05,
            weight_decay: 0.0,
            seed: 4,
        }
    }

    fn trained_redundant() -> (Circuit, Vec<f64>) {
        let c = redundant_ansatz();
        let cfg = finetune_cfg(250);
        let r = crate::grad::train(&c, &ZLoss, None, &cfg).unwrap();
        (c, r.params)
    }

    #[test]
    fn redundant_slot_is_pruned_without_loss() {
        let (c, trained) = trained_redundant();
        let base = batch_loss(&ZLoss, &c, &trained, &[0]).unwrap();
        assert!((base + 1.0).abs() < 1e-3);

        let cfg = finetune_cfg(80);
        let sched = PruneSchedule::new(0.05, 0.5, 80).unwrap();
        let out = prune_finetune(&c, &ZLoss, &sched, &cfg, trained).unwrap();
        assert_eq!(out.mask.count(), 1);
        assert!(out.mask.pruned[1], "redundant RZ slot should be pruned");
        assert_eq!(out.params[1], 0.0);
        let pruned_loss = batch_loss(&ZLoss, &c, &out.params, &[0]).unwrap();
        assert!((pruned_loss - base).abs() < 1e-3, "{pruned_loss} vs {base}");
    }

    #[test]
    fn final_fraction_is_exact_floor() {
        let mut c = Circuit::new(2);
        for i in 0..5 {
            c.push_gate(GateKind::RY, vec![i % 2], vec![Param::Slot(i)]).unwrap();
        }
        let cfg = finetune_cfg(40);
        let sched = PruneSchedule::new(0.05, 0.5, 40).unwrap();
        let init = crate::grad::init_params(5, 9);
        let out = prune_finetune(&c, &ZLoss, &sched, &cfg, init).unwrap();
        assert_eq!(out.mask.count(), 2); // ⌊0.5·5⌋
        for (i, &p) in out.params.iter().enumerate() {
            if out.mask.pruned[i] {
                assert_eq!(p.to_bits(), 0.0f64.to_bits(), "pruned slot {i} must be exactly 0.0");
            }
        }
    }

    #[test]
    fn zero_final_ratio_is_plain_finetune() {
        let (c, trained) = trained_redundant();
        let cfg = finetune_cfg(30);
        let sched = PruneSchedule::new(0.0, 0.0, 30).unwrap();
        let out = prune_finetune(&c, &ZLoss, &sched, &cfg, trained.clone()).unwrap();
        assert_eq!(out.mask.count(), 0);
        let plain = crate::grad::train_from(&c, &ZLoss, None, &cfg, trained).unwrap();
        assert_eq!(out.params, plain.params);
    }

    #[test]
    fn sweep_prefers_nondegrading_ratio() {
        let (c, trained) = trained_redundant();
        let cfg = finetune_cfg(80);
        let result = sweep_ratios(
            &c,
            &ZLoss,
            &[0.1, 0.2, 0.3, 0.4, 0.5],
            0.05,
            &cfg,
            trained,
            |params| batch_loss(&ZLoss, &c, params, &[0]),
            |params| batch_loss(&ZLoss, &c, params, &[0]).map(|l| -l),
        )
        .unwrap();
        let sel = result.selected.expect("a feasible ratio exists");
        assert!((result.rows[sel].ratio - 0.5).abs() < 1e-12 || result.rows[sel].quality >= result.unpruned_quality - 1e-9);
        // ratio 0.5 prunes the redundant slot with no quality loss, so the
        // selected row must not degrade
        assert!(result.rows[sel].quality >= result.unpruned_quality - 1e-6);
    }

    #[test]
    fn sweep_single_zero_ratio_keeps_unpruned() {
        let (c, trained) = trained_redundant();
        let cfg = finetune_cfg(20);
        let result = sweep_ratios(
            &c,
            &ZLoss,
            &[0.0],
            0.0,
            &cfg,
            trained,
            |params| batch_loss(&ZLoss, &c, params, &[0]),
            |params| batch_loss(&ZLoss, &c, params, &[0]).map(|l| -l),
        )
        .unwrap();
        assert_eq!(result.rows[0].mask.count(), 0);
    }

    #[test]
    fn pruning_reduces_compiled_gate_count() {
        use crate::noise::DeviceModel;
        use crate::qcompile::{route, stats_of, QubitMapping};
        // two U3 gates; two slots carry near-zero angles
        let mut c = Circuit::new(2);
        c.push_gate(
            GateKind::U3,
            vec![0],
            vec![Param::Slot(0), Param::Slot(1), Param::Slot(2)],
        )
        .unwrap();
        c.push_gate(
            GateKind::U3,
            vec![1],
            vec![Param::Slot(3), Param::Slot(4), Param::Slot(5)],
        )
        .unwrap();
        let params = [0.5, 0.4, 0.001, 0.6, 0.0005, 0.7];
        let mask = select_mask(&params, 2.0 / 6.0, &PruneMask::empty(6));
        assert_eq!(mask.pruned, vec![false, false, true, false, true, false]);
        let mut pruned = params.to_vec();
        mask.apply(&mut pruned);

        let device = DeviceModel::noiseless(2, [(0, 1)]);
        let mapping = QubitMapping::identity(2);
        let before = stats_of(&route(&c, &params, &mapping, &device).unwrap().circuit);
        let after = stats_of(&route(&c, &pruned, &mapping, &device).unwrap().circuit);
        assert!(
            after.n_1q < before.n_1q,
            "compiled 1q count must strictly drop: {} vs {}",
            after.n_1q,
            before.n_1q
        );
    }

    #[test]
    fn deterministic_outcomes() {
        let (c, trained) = trained_redundant();
        let cfg = finetune_cfg(30);
        let sched = PruneSchedule::new(0.05, 0.5, 30).unwrap();
        let a = prune_finetune(&c, &ZLoss, &sched, &cfg, trained.clone()).unwrap();
        let b = prune_finetune(&c, &ZLoss, &sched, &cfg, trained).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }
}
