//! Device and noise modeling: Kraus channels, density-matrix simulation and
//! the success-rate estimator.

mod channel;
mod device;
mod dm;

pub use channel::{depolarizing_kraus, thermal_relaxation_kraus, NoiseChannel};
pub use device::{load_device_model, DeviceModel};
pub use dm::{
    apply_readout_error, augmented_loss, dm_run, success_rate, DensityMatrix, MAX_DM_QUBITS,
};

#[cfg(test)]
pub(crate) use device::t_topology_fixture;
