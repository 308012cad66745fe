//! Core library: simulators, training, compilation and search for
//! noise-adaptive variational quantum circuits.

pub mod error;
pub mod evo;
pub mod grad;
pub mod linalg;
pub mod noise;
pub mod prune;
pub mod qcompile;
pub mod qstate;
pub mod space;
pub mod tasks;
pub mod textio;

pub use error::{Error, Result};
