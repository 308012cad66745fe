//! Adam with decoupled weight decay and the warmup/cosine schedule.

use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 5e-3,
            weight_decay: 1e-4,
            epochs: 200,
            batch_size: 256,
            warmup_steps: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, total_steps: u64) -> Result<()> {
        if self.lr0 <= 0.0 {
            return Err(Error::Validation("lr0 must be positive".into()));
        }
        if total_steps > 0 && self.warmup_steps >= total_steps {
            return Err(Error::Validation(format!(
                "warmup_steps ({}) must be below total steps ({total_steps})",
                self.warmup_steps
            )));
        }
        Ok(())
    }
}

/// Linear warmup to `lr0`, then cosine decay to zero at `total`.
pub fn lr_schedule(step: u64, total: u64, cfg: &TrainConfig) -> f64 {
    if total == 0 {
        return cfg.lr0;
    }
    let step = step.min(total);
    if cfg.warmup_steps > 0 && step < cfg.warmup_steps {
        return cfg.lr0 * step as f64 / cfg.warmup_steps as f64;
    }
    let span = (total - cfg.warmup_steps).max(1);
    let progress = (step - cfg.warmup_steps) as f64 / span as f64;
    cfg.lr0 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Per-slot first/second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        OptimizerState { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }
}

/// One Adam update on every slot.
pub fn adam_step(
    opt: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<()> {
    let all: Vec<usize> = (0..params.len()).collect();
    adam_step_masked(opt, params, grads, cfg, lr, &all)
}

/// One Adam update restricted to the listed slots. Moments of other slots are
/// untouched; bias correction uses the shared step counter.
pub fn adam_step_masked(
    opt: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    cfg: &TrainConfig,
    lr: f64,
    slots: &[usize],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != opt.m.len() {
        return Err(Error::Validation(format!(
            "dimension mismatch: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            opt.m.len()
        )));
    }
    for &s in slots {
        if !grads[s].is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient at slot {s}")));
        }
    }
    opt.step += 1;
    let t = opt.step;
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    for &s in slots {
        let g = grads[s];
        opt.m[s] = BETA1 * opt.m[s] + (1.0 - BETA1) * g;
        opt.v[s] = BETA2 * opt.v[s] + (1.0 - BETA2) * g * g;
        let m_hat = opt.m[s] / bc1;
        let v_hat = opt.v[s] / bc2;
        // decoupled weight decay: applied to the parameter, not the moments
        params[s] -= lr * cfg.weight_decay * params[s];
        params[s] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let cfg = TrainConfig { weight_decay: 0.0, ..Default::default() };
        let mut opt = OptimizerState::new(2);
        let mut params = vec![0.3, -0.7];
        adam_step(&mut opt, &mut params, &[0.0, 0.0], &cfg, 1e-2).unwrap();
        assert_eq!(params, vec![0.3, -0.7]);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let cfg = TrainConfig { weight_decay: 0.0, ..Default::default() };
        let mut opt = OptimizerState::new(1);
        let mut params = vec![0.0];
        let lr = 3e-3;
        adam_step(&mut opt, &mut params, &[0.42], &cfg, lr).unwrap();
        // m̂ = g, v̂ = g² on step 1, so |Δ| ≈ lr with the sign of g
        assert!(params[0] < 0.0);
        assert!((params[0].abs() - lr).abs() < 1e-6);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // minimize (θ - 2)² from θ = 0
        let cfg = TrainConfig { lr0: 0.1, weight_decay: 0.0, ..Default::default() };
        let mut opt = OptimizerState::new(1);
        let mut theta = vec![0.0];
        for _ in 0..100 {
            let g = 2.0 * (theta[0] - 2.0);
            adam_step(&mut opt, &mut theta, &[g], &cfg, 0.1).unwrap();
        }
        assert!((theta[0] - 2.0).abs() < 0.05, "theta = {}", theta[0]);
    }

    #[test]
    fn nan_gradient_leaves_state_unchanged() {
        let cfg = TrainConfig::default();
        let mut opt = OptimizerState::new(1);
        let mut params = vec![0.5];
        let before = opt.clone();
        let err = adam_step(&mut opt, &mut params, &[f64::NAN], &cfg, 1e-2);
        assert!(matches!(err, Err(crate::error::Error::Numeric(_))));
        assert_eq!(opt, before);
        assert_eq!(params, vec![0.5]);
    }

    #[test]
    fn schedule_endpoints_and_shape() {
        let cfg = TrainConfig { lr0: 5e-3, warmup_steps: 30, ..Default::default() };
        let total = 200;
        assert_eq!(lr_schedule(0, total, &cfg), 0.0);
        assert!((lr_schedule(30, total, &cfg) - 5e-3).abs() < 1e-15);
        assert!(lr_schedule(total, total, &cfg).abs() < 1e-12);
        // non-decreasing on warmup, non-increasing after
        for s in 1..=30u64 {
            assert!(lr_schedule(s, total, &cfg) >= lr_schedule(s - 1, total, &cfg));
        }
        for s in 31..=total {
            assert!(lr_schedule(s, total, &cfg) <= lr_schedule(s - 1, total, &cfg) + 1e-15);
        }
    }
}
