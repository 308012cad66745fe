//! Library surface of the pipeline driver, exposed for the integration and
//! acceptance suites.

pub mod config;
pub mod csvio;
pub mod stages;
