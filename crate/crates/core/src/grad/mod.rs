//! Gradients (parameter shift plus a finite-difference oracle) and the
//! Adam/cosine training loop shared by the SuperCircuit, SubCircuit and
//! finetune stages.

mod checkpoint;
mod optim;
mod shift;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use optim::{adam_step, adam_step_masked, lr_schedule, OptimizerState, TrainConfig};
pub use shift::{batch_loss, finite_diff_grad, param_shift_grad, sample_loss, Loss};
pub use train::{init_params, train, train_from, StepRecord, TrainResult};
