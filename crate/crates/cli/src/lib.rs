//! Experiment harness for the conditional-mean hedging engine: declarative
//! configuration, seeded ensembles, conditional-resimulation verification,
//! kernel self-tests, and deterministic report emission.

pub mod config;
pub mod experiment;
pub mod initial;
pub mod report;
pub mod verify;

pub use config::{ExperimentConfig, Overrides};
pub use experiment::run_experiment;
pub use initial::initial_position;
pub use verify::{verify_kernels, verify_tracking};
